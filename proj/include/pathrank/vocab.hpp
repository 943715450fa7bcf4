#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pathrank {

// Fixed synthetic vocabulary: special tokens, function words, then one word
// per landmark class. Token ids are stable given the class count.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kCls = 1;
  static constexpr int kSep = 2;
  static constexpr int kMask = 3;

  explicit Vocab(int n_landmark_classes) : n_classes_(n_landmark_classes) {
    static const std::vector<std::string> kFunction = {
        "go", "walk", "turn", "forward", "left", "right", "then",
        "past", "the", "to", "stop", "at", "reach", "near"};
    static const std::vector<std::string> kNouns = {
        "chair", "table",  "lamp",  "door",  "plant", "sofa",     "fridge", "stairs",
        "mirror", "shelf",  "sink",  "bed",   "desk",  "piano",    "clock",  "vase",
        "rug",    "bench",  "stove", "window", "cabinet", "painting", "pillar", "rack"};
    words_ = {"[PAD]", "[CLS]", "[SEP]", "[MASK]"};
    for (const auto& w : kFunction) words_.push_back(w);
    landmark_base_ = static_cast<int>(words_.size());
    for (int c = 0; c < n_classes_; ++c)
      words_.push_back(c < static_cast<int>(kNouns.size()) ? kNouns[c]
                                                           : "object" + std::to_string(c));
    for (size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
  }

  int size() const { return static_cast<int>(words_.size()); }
  int n_landmark_classes() const { return n_classes_; }

  int id(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) throw std::out_of_range("unknown word: " + w);
    return it->second;
  }
  const std::string& word(int id) const { return words_.at(static_cast<size_t>(id)); }

  int landmark_word(int cls) const {
    if (cls < 0 || cls >= n_classes_) throw std::out_of_range("landmark class out of range");
    return landmark_base_ + cls;
  }
  bool is_landmark_word(int id) const { return id >= landmark_base_ && id < size(); }
  int landmark_class_of(int id) const { return id - landmark_base_; }
  bool is_special(int id) const { return id < 4; }

  std::string detokenize(const std::vector<int>& ids) const {
    std::string s;
    for (int id : ids) {
      if (!s.empty()) s += ' ';
      s += word(id);
    }
    return s;
  }

 private:
  int n_classes_;
  int landmark_base_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace pathrank
