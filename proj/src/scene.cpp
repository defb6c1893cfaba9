#include "nvsc/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "nvsc/errors.hpp"
#include "nvsc/rng.hpp"

namespace nvsc {

namespace {

constexpr std::uint8_t kSceneMagic[4] = {'G', 'S', 'C', '1'};
constexpr std::size_t kFloatsPerGaussian = 14;

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

Eigen::Quaternionf random_rotation(Rng& rng) {
  // Shoemake's uniform quaternion
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
  Eigen::Quaterniond q(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
  return q.normalized().cast<float>();
}

Eigen::Quaternionf rotation_about_z(double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, Vec3::UnitZ())).cast<float>();
}

// Rotation taking the local z axis onto `dir`.
Eigen::Quaternionf align_z_to(const Vec3& dir) {
  return Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), dir.normalized()).cast<float>();
}

Eigen::Vector3f to_f(const Vec3& v) { return v.cast<float>(); }

Vec3 clamp_into(const Vec3& p, const Box& b) {
  return p.cwiseMax(b.min).cwiseMin(b.max);
}

// Rounding to float can push a clamped coordinate just outside the box.
Eigen::Vector3f store_inside(const Vec3& p, const Eigen::Vector3f& lo, const Eigen::Vector3f& hi) {
  Eigen::Vector3f f = p.cast<float>();
  return f.cwiseMax(lo).cwiseMin(hi);
}

void add_scatter(Scene& s, Rng& rng, int count, const Box& b) {
  const double m = b.extent().minCoeff();
  for (int i = 0; i < count; ++i) {
    Gaussian3D g;
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(b.min[a], b.max[a]);
    g.mean = store_inside(p, s.bounds_min, s.bounds_max);
    for (int a = 0; a < 3; ++a) g.scale[a] = static_cast<float>(m * rng.uniform(0.02, 0.07));
    g.rotation = random_rotation(rng);
    for (int a = 0; a < 3; ++a) g.color[a] = clamp01(rng.uniform(0.05, 0.95));
    g.opacity = static_cast<float>(rng.uniform(0.5, 1.0));
    s.gaussians.push_back(g);
  }
}

void add_lattice(Scene& s, Rng& rng, int count, const Box& b) {
  const int n = std::max(1, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(count)))));
  const Vec3 e = b.extent();
  const double m = e.minCoeff();
  for (int i = 0; i < count; ++i) {
    const int ix = i % n, iy = (i / n) % n, iz = i / (n * n);
    const Vec3 u((ix + 0.5) / n, (iy + 0.5) / n, (iz + 0.5) / n);
    Gaussian3D g;
    g.mean = store_inside(b.min + u.cwiseProduct(e), s.bounds_min, s.bounds_max);
    g.scale = Eigen::Vector3f::Constant(static_cast<float>(0.35 * m / n));
    g.rotation = Eigen::Quaternionf::Identity();
    g.color = Eigen::Vector3f(clamp01(0.15 + 0.7 * u.x()), clamp01(0.15 + 0.7 * u.y()),
                              clamp01(0.85 - 0.7 * u.z() + 0.05 * rng.uniform(-1, 1)));
    g.opacity = 0.9f;
    s.gaussians.push_back(g);
  }
}

// Vertical piles in two staggered rows joined by horizontal tubes, standing on a
// floor. Piles carry horizontal colour bands so every degree of freedom of the
// camera changes the image.
void add_barrel_structure(Scene& s, Rng& rng, int count, const Box& b) {
  const Vec3 e = b.extent();
  const double m = e.minCoeff();
  const int n_piles = 6;
  const int n_floor = count >= 20 ? count * 3 / 20 : 0;
  const int n_tubes = count >= 10 ? count / 4 : 0;
  const int n_piles_total = count - n_floor - n_tubes;
  const double radius = 0.07 * m;
  const double z_lo = b.min.z() + 0.08 * e.z();
  const double z_hi = b.max.z() - 0.08 * e.z();

  std::vector<Vec3> axes;  // pile base centres (x, y), z unused
  for (int i = 0; i < n_piles; ++i) {
    const int col = i % 3, row = i / 3;
    const double x = b.min.x() + e.x() * (0.2 + 0.3 * col + 0.06 * rng.uniform(-1, 1));
    const double y = b.min.y() + e.y() * (row == 0 ? 0.3 : 0.7) + 0.05 * e.y() * rng.uniform(-1, 1);
    axes.emplace_back(x, y, 0.0);
  }
  static const double kPalette[6][3] = {{0.80, 0.45, 0.20}, {0.60, 0.62, 0.66},
                                        {0.85, 0.75, 0.25}, {0.45, 0.50, 0.58},
                                        {0.70, 0.35, 0.25}, {0.55, 0.65, 0.55}};

  for (int i = 0; i < n_piles_total; ++i) {
    const int pile = i % n_piles;
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double z = rng.uniform(z_lo, z_hi);
    const Vec3 p(axes[pile].x() + radius * std::cos(angle), axes[pile].y() + radius * std::sin(angle), z);
    Gaussian3D g;
    g.mean = store_inside(clamp_into(p, b), s.bounds_min, s.bounds_max);
    g.scale = Eigen::Vector3f(static_cast<float>(radius * rng.uniform(0.35, 0.6)),
                              static_cast<float>(radius * rng.uniform(0.15, 0.3)),
                              static_cast<float>(0.05 * e.z() * rng.uniform(0.6, 1.4)));
    // local x tangent-ish to the pile
    g.rotation = rotation_about_z(angle + 0.5 * std::numbers::pi);
    const double band = std::floor((z - b.min.z()) / (0.12 * e.z()));
    const double shade = (static_cast<long>(band) % 2 == 0 ? 1.0 : 0.55) * rng.uniform(0.8, 1.1);
    for (int a = 0; a < 3; ++a) g.color[a] = clamp01(kPalette[pile][a] * shade);
    g.opacity = static_cast<float>(rng.uniform(0.75, 1.0));
    s.gaussians.push_back(g);
  }

  // Tubes between neighbouring piles in each row and across the rows.
  const int links[7][2] = {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {0, 3}, {1, 4}, {2, 5}};
  for (int i = 0; i < n_tubes; ++i) {
    const auto& link = links[i % 7];
    const double height = (i / 7) % 2 == 0 ? 0.35 : 0.7;
    const double z = b.min.z() + e.z() * height;
    const Vec3 a(axes[link[0]].x(), axes[link[0]].y(), z);
    const Vec3 c(axes[link[1]].x(), axes[link[1]].y(), z);
    const double t = rng.uniform(0.15, 0.85);
    Gaussian3D g;
    g.mean = store_inside(clamp_into(a + t * (c - a), b), s.bounds_min, s.bounds_max);
    const double len = (c - a).norm();
    g.scale = Eigen::Vector3f(static_cast<float>(0.025 * m), static_cast<float>(0.025 * m),
                              static_cast<float>(std::max(0.04 * m, 0.12 * len)));
    g.rotation = align_z_to(c - a);
    const double shade = rng.uniform(0.7, 1.0);
    g.color = Eigen::Vector3f(clamp01(0.75 * shade), clamp01(0.72 * shade), clamp01(0.68 * shade));
    g.opacity = 0.9f;
    s.gaussians.push_back(g);
  }

  // Floor tiles with a coarse checker.
  for (int i = 0; i < n_floor; ++i) {
    const double x = rng.uniform(b.min.x(), b.max.x());
    const double y = rng.uniform(b.min.y(), b.max.y());
    Gaussian3D g;
    g.mean = store_inside(Vec3(x, y, b.min.z() + 0.02 * e.z()), s.bounds_min, s.bounds_max);
    g.scale = Eigen::Vector3f(static_cast<float>(0.12 * m), static_cast<float>(0.12 * m),
                              static_cast<float>(0.01 * m));
    g.rotation = rotation_about_z(rng.uniform(0.0, std::numbers::pi));
    const int cx = static_cast<int>(std::floor(4.0 * (x - b.min.x()) / e.x()));
    const int cy = static_cast<int>(std::floor(4.0 * (y - b.min.y()) / e.y()));
    const double v = ((cx + cy) % 2 == 0 ? 0.55 : 0.3) * rng.uniform(0.85, 1.15);
    g.color = Eigen::Vector3f(clamp01(v * 0.8), clamp01(v * 0.9), clamp01(v));
    g.opacity = 0.95f;
    s.gaussians.push_back(g);
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    if (pos_ + 4 > bytes_.size()) {
      throw TruncatedScene(std::string("scene stream truncated reading ") + what + " at byte " +
                           std::to_string(pos_));
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Eigen::Vector3f read_vec3(Reader& r, const char* what) {
  Eigen::Vector3f v;
  for (int i = 0; i < 3; ++i) v[i] = r.f32(what);
  return v;
}

}  // namespace

Mat3 Gaussian3D::covariance() const {
  const Mat3 r = rotation.cast<double>().normalized().toRotationMatrix();
  const Vec3 s = scale.cast<double>();
  return r * s.cwiseAbs2().asDiagonal() * r.transpose();
}

bool Gaussian3D::operator==(const Gaussian3D& o) const {
  return mean == o.mean && scale == o.scale && rotation.coeffs() == o.rotation.coeffs() &&
         color == o.color && opacity == o.opacity;
}

bool Scene::operator==(const Scene& o) const {
  return gaussians == o.gaussians && background == o.background && bounds_min == o.bounds_min &&
         bounds_max == o.bounds_max;
}

void validate_gaussian(const Gaussian3D& g) {
  const auto finite = [](const auto& v) { return v.allFinite(); };
  if (!finite(g.mean) || !finite(g.scale) || !finite(g.rotation.coeffs()) || !finite(g.color) ||
      !std::isfinite(g.opacity)) {
    throw InvariantViolation("gaussian has non-finite fields");
  }
  const double qn = g.rotation.coeffs().cast<double>().norm();
  if (std::abs(qn - 1.0) > 1e-6) {
    throw InvariantViolation("gaussian quaternion norm " + std::to_string(qn) + " is not unit");
  }
  if ((g.scale.array() <= 0.0f).any()) throw InvariantViolation("gaussian scale must be positive");
  if ((g.color.array() < 0.0f).any() || (g.color.array() > 1.0f).any()) {
    throw InvariantViolation("gaussian color outside [0,1]");
  }
  if (!(g.opacity > 0.0f && g.opacity <= 1.0f)) throw InvariantViolation("gaussian opacity outside (0,1]");
}

void validate_scene(const Scene& scene) {
  if (!scene.bounds_min.allFinite() || !scene.bounds_max.allFinite() ||
      !(scene.bounds_min.array() < scene.bounds_max.array()).all()) {
    throw InvariantViolation("scene bounds are degenerate");
  }
  if ((scene.background.array() < 0.0f).any() || (scene.background.array() > 1.0f).any()) {
    throw InvariantViolation("scene background outside [0,1]");
  }
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const Gaussian3D& g = scene.gaussians[i];
    validate_gaussian(g);
    if ((g.mean.array() < scene.bounds_min.array()).any() ||
        (g.mean.array() > scene.bounds_max.array()).any()) {
      throw InvariantViolation("gaussian " + std::to_string(i) + " lies outside scene bounds");
    }
  }
}

SceneStyle parse_scene_style(const std::string& name) {
  if (name == "scatter") return SceneStyle::scatter;
  if (name == "lattice") return SceneStyle::lattice;
  if (name == "barrel-structure" || name == "barrel_structure") return SceneStyle::barrel_structure;
  throw DomainError("unknown scene style: " + name);
}

std::string to_string(SceneStyle style) {
  switch (style) {
    case SceneStyle::scatter: return "scatter";
    case SceneStyle::lattice: return "lattice";
    case SceneStyle::barrel_structure: return "barrel-structure";
  }
  return "?";
}

Scene generate_synthetic_scene(std::uint64_t seed, int count, const Box& bounds, SceneStyle style) {
  if (count < 1) throw EmptyScene("scene needs at least one gaussian");
  if (!bounds.valid() || !bounds.min.allFinite() || !bounds.max.allFinite()) {
    throw InvalidBounds("scene bounds are degenerate");
  }
  Scene s;
  s.bounds_min = to_f(bounds.min);
  s.bounds_max = to_f(bounds.max);
  if (!(s.bounds_min.array() < s.bounds_max.array()).all()) {
    throw InvalidBounds("scene bounds collapse in single precision");
  }
  Rng rng(seed);
  // float(bounds) may be slightly inside the double box; generate within the float box
  const Box fb = s.bounds();
  switch (style) {
    case SceneStyle::scatter:
      s.background = Eigen::Vector3f(0.1f, 0.1f, 0.12f);
      add_scatter(s, rng, count, fb);
      break;
    case SceneStyle::lattice:
      s.background = Eigen::Vector3f(0.05f, 0.05f, 0.05f);
      add_lattice(s, rng, count, fb);
      break;
    case SceneStyle::barrel_structure:
      s.background = Eigen::Vector3f(0.05f, 0.22f, 0.3f);
      add_barrel_structure(s, rng, count, fb);
      break;
  }
  validate_scene(s);
  return s;
}

Scene make_bar_fragment(std::uint64_t seed, int count, double length, double width) {
  Rng rng(seed);
  Scene s;
  s.bounds_min = Eigen::Vector3f(-width, -width, -0.5 * length);
  s.bounds_max = Eigen::Vector3f(width, width, 0.5 * length);
  for (int i = 0; i < count; ++i) {
    Gaussian3D g;
    const double z = count > 1 ? -0.5 * length + length * i / (count - 1) : 0.0;
    const Vec3 p(0.25 * width * rng.uniform(-1, 1), 0.25 * width * rng.uniform(-1, 1),
                 0.9 * z);
    g.mean = store_inside(p, s.bounds_min, s.bounds_max);
    g.scale = Eigen::Vector3f(static_cast<float>(0.3 * width), static_cast<float>(0.3 * width),
                              static_cast<float>(std::max(0.5 * length / std::max(count, 1), 0.2 * width)));
    g.rotation = rotation_about_z(rng.uniform(0.0, std::numbers::pi));
    const double shade = (i % 4 < 2) ? 0.9 : 0.6;
    g.color = Eigen::Vector3f(clamp01(0.82 * shade), clamp01(0.84 * shade), clamp01(0.88 * shade));
    g.opacity = 1.0f;
    s.gaussians.push_back(g);
  }
  return s;
}

std::vector<std::uint8_t> save_scene(const Scene& scene) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + scene.gaussians.size() * kFloatsPerGaussian * 4 + 36);
  out.insert(out.end(), std::begin(kSceneMagic), std::end(kSceneMagic));
  put_u32(out, static_cast<std::uint32_t>(scene.gaussians.size()));
  for (const Gaussian3D& g : scene.gaussians) {
    for (int i = 0; i < 3; ++i) put_f32(out, g.mean[i]);
    for (int i = 0; i < 3; ++i) put_f32(out, g.scale[i]);
    put_f32(out, g.rotation.w());
    put_f32(out, g.rotation.x());
    put_f32(out, g.rotation.y());
    put_f32(out, g.rotation.z());
    for (int i = 0; i < 3; ++i) put_f32(out, g.color[i]);
    put_f32(out, g.opacity);
  }
  for (int i = 0; i < 3; ++i) put_f32(out, scene.background[i]);
  for (int i = 0; i < 3; ++i) put_f32(out, scene.bounds_min[i]);
  for (int i = 0; i < 3; ++i) put_f32(out, scene.bounds_max[i]);
  return out;
}

void save_scene(const Scene& scene, std::ostream& out) {
  const auto bytes = save_scene(scene);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing scene stream");
}

void save_scene_file(const Scene& scene, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  save_scene(scene, f);
}

Scene load_scene(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw TruncatedScene("scene stream shorter than its magic");
  if (!std::equal(std::begin(kSceneMagic), std::end(kSceneMagic), bytes.begin())) {
    throw MalformedScene("bad scene magic (expected GSC1)");
  }
  Reader r(bytes);
  r.skip(4);
  const std::uint32_t count = r.u32("gaussian count");
  // Reject counts that cannot fit before allocating.
  const std::size_t needed = static_cast<std::size_t>(count) * kFloatsPerGaussian * 4 + 9 * 4;
  if (r.remaining() < needed) {
    throw TruncatedScene("scene stream declares " + std::to_string(count) + " gaussians but holds " +
                         std::to_string(r.remaining()) + " bytes after the header");
  }
  Scene s;
  s.gaussians.resize(count);
  for (Gaussian3D& g : s.gaussians) {
    g.mean = read_vec3(r, "mean");
    g.scale = read_vec3(r, "scale");
    const float w = r.f32("rotation"), x = r.f32("rotation"), y = r.f32("rotation"),
                z = r.f32("rotation");
    g.rotation = Eigen::Quaternionf(w, x, y, z);
    g.color = read_vec3(r, "color");
    g.opacity = r.f32("opacity");
  }
  s.background = read_vec3(r, "background");
  s.bounds_min = read_vec3(r, "bounds");
  s.bounds_max = read_vec3(r, "bounds");
  if (r.remaining() != 0) {
    throw MalformedScene("trailing bytes after scene record at byte " + std::to_string(r.pos()));
  }
  validate_scene(s);
  return s;
}

Scene load_scene(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_scene(std::span<const std::uint8_t>(bytes));
}

Scene load_scene_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  return load_scene(f);
}

Scene add_novel_object(const Scene& scene, const Scene& fragment, const Pose& placement) {
  Scene out = scene;
  for (const Gaussian3D& g : fragment.gaussians) {
    Gaussian3D t = g;
    t.mean = placement.transform(g.mean.cast<double>()).cast<float>();
    t.rotation = (placement.rotation * g.rotation.cast<double>()).normalized().cast<float>();
    out.bounds_min = out.bounds_min.cwiseMin(t.mean);
    out.bounds_max = out.bounds_max.cwiseMax(t.mean);
    out.gaussians.push_back(t);
  }
  validate_scene(out);
  return out;
}

}  // namespace nvsc
