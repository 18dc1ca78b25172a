#ifndef CAMREID_CHECKPOINT_HPP_
#define CAMREID_CHECKPOINT_HPP_

#include <filesystem>
#include <iosfwd>

#include "camreid/apra.hpp"

namespace camreid::apra {

/// Text checkpoint of the attention sub-networks and the camera head.
/// Sections appear in the order channel_mlp_1, channel_mlp_2, spatial_conv,
/// camera_head. Each is
///
///   section <name>
///   weight
///   <tensor fixture>
///   bias
///   <tensor fixture>
void write_checkpoint(std::ostream& os, const ApraParams& params,
                      const CameraHead& head);

/// Overwrites the values of `params` and `head` in place. Shapes must match
/// the file; a missing or misnamed section throws std::runtime_error.
void read_checkpoint(std::istream& is, ApraParams& params, CameraHead& head);

void save_checkpoint(const std::filesystem::path& path, const ApraParams& params,
                     const CameraHead& head);
void load_checkpoint(const std::filesystem::path& path, ApraParams& params,
                     CameraHead& head);

}  // namespace camreid::apra

#endif  // CAMREID_CHECKPOINT_HPP_
