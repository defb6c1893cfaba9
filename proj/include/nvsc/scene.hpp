#pragma once

// Gaussian scene prior shared by encoder and decoder.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nvsc/geometry.hpp"

namespace nvsc {

// Fields are single precision so the on-disk format round-trips exactly.
struct Gaussian3D {
  Eigen::Vector3f mean = Eigen::Vector3f::Zero();
  Eigen::Vector3f scale = Eigen::Vector3f::Constant(0.1f);  // per-axis std-dev
  Eigen::Quaternionf rotation = Eigen::Quaternionf::Identity();
  Eigen::Vector3f color = Eigen::Vector3f::Constant(0.5f);
  float opacity = 1.0f;

  // World-space covariance R S^2 R^T.
  Mat3 covariance() const;

  bool operator==(const Gaussian3D& o) const;
};

struct Scene {
  std::vector<Gaussian3D> gaussians;
  Eigen::Vector3f background = Eigen::Vector3f::Zero();
  Eigen::Vector3f bounds_min = Eigen::Vector3f::Constant(-1.0f);
  Eigen::Vector3f bounds_max = Eigen::Vector3f::Constant(1.0f);

  Box bounds() const { return {bounds_min.cast<double>(), bounds_max.cast<double>()}; }
  bool operator==(const Scene& o) const;
};

// Throws InvariantViolation naming the first broken invariant.
void validate_gaussian(const Gaussian3D& g);
void validate_scene(const Scene& scene);

enum class SceneStyle { scatter, lattice, barrel_structure };

SceneStyle parse_scene_style(const std::string& name);
std::string to_string(SceneStyle style);

Scene generate_synthetic_scene(std::uint64_t seed, int count, const Box& bounds, SceneStyle style);

// Elongated bar of `count` Gaussians centred at the origin, long axis along z,
// for novel-object injection. `length` and `width` are in scene units.
Scene make_bar_fragment(std::uint64_t seed, int count, double length, double width);

// Binary format: "GSC1", u32 count, count x 14 f32, background 3 f32, bounds 6 f32.
// All little-endian.
std::vector<std::uint8_t> save_scene(const Scene& scene);
void save_scene(const Scene& scene, std::ostream& out);
void save_scene_file(const Scene& scene, const std::string& path);
Scene load_scene(std::span<const std::uint8_t> bytes);
Scene load_scene(std::istream& in);
Scene load_scene_file(const std::string& path);

// Places the fragment's Gaussians (transformed by `placement`, a rigid
// fragment-to-world map) into a copy of the scene. Bounds grow to fit.
Scene add_novel_object(const Scene& scene, const Scene& fragment, const Pose& placement);

}  // namespace nvsc
