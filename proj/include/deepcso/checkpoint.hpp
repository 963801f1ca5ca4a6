#pragma once

#include <string>

#include "deepcso/data.hpp"
#include "deepcso/model.hpp"

namespace deepcso {

inline constexpr int kCheckpointVersion = 1;

/// A trained model together with the preprocessing it was trained under.
struct Checkpoint {
  Model model;
  ScalerParams scaler;
  LagSpec lags;

  /// Level channels in output order.
  std::vector<std::string> stations() const;
  void validate() const;
};

std::string checkpoint_to_string(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_string(const std::string& text);

/// Writes through a temporary file so a failed save leaves no partial file.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace deepcso
