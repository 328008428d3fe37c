#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "styleshift/datamodel.hpp"

namespace styleshift {

/// Anything that labels every sample of an evaluation set. `set_key` names
/// the set being scored ("clean", "ood", or a corruption key such as
/// "gaussian_noise:3"); trained models ignore it, stored-logit fixtures use it.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<int> predict_set(std::string_view set_key,
                                       const DomainDataset& dataset) const = 0;
  virtual std::string identity() const = 0;
};

}  // namespace styleshift
