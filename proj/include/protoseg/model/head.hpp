#pragma once

#include <array>
#include <vector>

#include "protoseg/nn/module.hpp"

namespace protoseg {

enum class HeadTag { semantic, motion };

inline std::string to_string(HeadTag t) { return t == HeadTag::semantic ? "semantic" : "motion"; }

// Per-anchor predictions for one head, rows ordered like the anchor list.
template <typename T>
struct HeadOutput {
  ad::Var<T> box;     // [A, 4]
  ad::Var<T> logits;  // [A, num_categories + 1], background at index 0
  ad::Var<T> coeff;   // [A, k], tanh-bounded
  HeadTag tag = HeadTag::semantic;
};

// One prediction head: a shared 3x3 tower applied to every pyramid level,
// then sibling 3x3 predictors for boxes, category logits and prototype
// coefficients. The semantic and motion heads are two independently
// parameterised instances of this class.
template <typename T>
class PredictionHead {
 public:
  PredictionHead() = default;
  PredictionHead(HeadTag tag, int in_channels, int num_categories, int num_prototypes,
                 int num_ratios, Rng rng)
      : tag_(tag),
        num_categories_(num_categories),
        num_prototypes_(num_prototypes),
        num_ratios_(num_ratios),
        tower_(in_channels, in_channels, 3, 1, rng),
        box_(in_channels, num_ratios * 4, 3, 1, rng),
        cls_(in_channels, num_ratios * (num_categories + 1), 3, 1, rng),
        coeff_(in_channels, num_ratios * num_prototypes, 3, 1, rng) {}

  HeadOutput<T> forward(const std::array<ad::Var<T>, 5>& pyramid) const {
    std::vector<ad::Var<T>> boxes, logits, coeffs;
    for (const auto& level : pyramid) {
      ad::Var<T> t = ad::relu(tower_(level));
      boxes.push_back(ad::head_permute(box_(t), num_ratios_, 4));
      logits.push_back(ad::head_permute(cls_(t), num_ratios_, num_categories_ + 1));
      coeffs.push_back(ad::head_permute(coeff_(t), num_ratios_, num_prototypes_));
    }
    HeadOutput<T> out;
    out.box = ad::concat_rows(boxes);
    out.logits = ad::concat_rows(logits);
    out.coeff = ad::tanh_act(ad::concat_rows(coeffs));
    out.tag = tag_;
    return out;
  }

  int num_categories() const { return num_categories_; }
  HeadTag tag() const { return tag_; }

  void collect(const std::string& prefix, ParamMap<T>& out) const {
    tower_.collect(prefix + ".tower", out);
    box_.collect(prefix + ".box", out);
    cls_.collect(prefix + ".cls", out);
    coeff_.collect(prefix + ".coeff", out);
  }

 private:
  HeadTag tag_ = HeadTag::semantic;
  int num_categories_ = 0, num_prototypes_ = 0, num_ratios_ = 3;
  Conv2dLayer<T> tower_, box_, cls_, coeff_;
};

}  // namespace protoseg
