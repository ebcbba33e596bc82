#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vascuscan/mesh.hpp"
#include "vascuscan/volume.hpp"

namespace vascuscan {

/// Generator regime. Family B uses thicker, more tortuous tubes than A; a
/// model trained on one family and tested on the other measures how well it
/// transfers across acquisition styles.
enum class PhantomFamily { A, B };

/// Parameters of a synthetic vessel tree. Lengths are in voxels.
struct PhantomSpec {
  std::uint64_t seed = 0;
  PhantomFamily family = PhantomFamily::A;
  std::array<int, 3> dims{64, 64, 64};
  double spacing_mm = 1.0;

  int tube_count = 6;  ///< trunk plus branches
  double tube_radius_min = 1.6;
  double tube_radius_max = 2.2;
  int segments_per_tube = 6;
  double segment_length = 8.0;
  double max_turn_deg = 20.0;

  int blob_count = 1;
  double blob_radius_min = 3.5;
  double blob_radius_max = 5.0;

  double smoothing_sigma = 0.7;  ///< Gaussian blur of the binary volume; 0 disables
  double label_margin = 1.0;     ///< labelling tolerance around blob spheres

  /// Defaults for a family, sized for meshes of roughly 5000 vertices.
  static PhantomSpec for_family(PhantomFamily family, std::uint64_t seed);
};

/// Capsule segment in millimetres.
struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
};

/// Spherical aneurysm stand-in, in millimetres.
struct Blob {
  Vec3 center;
  double radius = 0.0;
  double tube_radius = 0.0;  ///< radius of the tube it sits on
};

struct Phantom {
  ScalarVolume volume;
  std::vector<Capsule> tubes;
  std::vector<Blob> blobs;
};

/// Rasterises a capsule-chain vessel tree with blobs centred on tube
/// surfaces. Intensity is 1 inside, 0 outside, optionally blurred.
/// Deterministic in the spec.
Phantom generate_phantom(const PhantomSpec& spec);

/// Labels a vertex aneurysm when it lies within radius + margin of a blob
/// centre, vessel otherwise.
TriangleMesh label_mesh(TriangleMesh m, std::span<const Blob> blobs, double margin_mm = 0.0);

/// Solid ball (1 inside, 0 outside), optionally blurred. Radius and centre in
/// voxels; spacing 1 mm, origin 0.
ScalarVolume make_ball_volume(std::array<int, 3> dims, Vec3 center, double radius,
                              double smoothing_sigma = 0.0);

/// In-place separable Gaussian blur with zero padding.
void gaussian_blur(ScalarVolume& v, double sigma_voxels);

nlohmann::json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
nlohmann::json blobs_to_json(std::span<const Blob> blobs);
std::vector<Blob> blobs_from_json(const nlohmann::json& j);

std::string to_string(PhantomFamily f);
PhantomFamily parse_family(const std::string& s);

}  // namespace vascuscan
