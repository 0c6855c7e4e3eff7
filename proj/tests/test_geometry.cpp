#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rigcal/geometry.hpp"
#include "test_util.hpp"

using namespace rigcal;
using testutil::random_pose;
using testutil::random_rotation;
using testutil::random_unit_vector;
using testutil::random_vector;

namespace {
const double kPi = std::numbers::pi;

Rotation rot_z(double angle) { return Rotation::exp(Vec3(0, 0, angle)); }
}  // namespace

TEST_CASE("rotation canonical form") {
  const Rotation r = Rotation::from_quaternion(-0.5, 0.5, -0.5, 0.5);
  CHECK(r.quaternion().w() >= 0.0);
  CHECK(r.quaternion().norm() == doctest::Approx(1.0).epsilon(1e-12));

  // both signs of the same quaternion canonicalize identically
  const Rotation a = Rotation::from_quaternion(0.2, -0.3, 0.4, 0.5);
  const Rotation b = Rotation::from_quaternion(-0.2, 0.3, -0.4, -0.5);
  CHECK(a.quaternion().coeffs().isApprox(b.quaternion().coeffs(), 1e-15));

  CHECK_THROWS_AS(Rotation::from_quaternion(0, 0, 0, 0), CalibError);
}

TEST_CASE("pose compose") {
  std::mt19937_64 rng(7);
  const Pose p = random_pose(rng);

  CHECK((Pose::identity() * p).isApprox(p, 1e-15));
  CHECK((p * p.inverse()).isApprox(Pose::identity(), 1e-12));

  const Pose two_quarters = Pose::from_rotation(rot_z(kPi / 2)) * Pose::from_rotation(rot_z(kPi / 2));
  CHECK(two_quarters.isApprox(Pose::from_rotation(rot_z(kPi)), 1e-12));
}

TEST_CASE("pose inverse") {
  CHECK(Pose::identity().inverse().isApprox(Pose::identity(), 1e-15));

  const Pose t = Pose::from_translation(Vec3(1, 2, 3));
  CHECK(t.inverse().translation().isApprox(Vec3(-1, -2, -3), 1e-15));

  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    CHECK((p.inverse() * p).isApprox(Pose::identity(), 1e-12));
  }
}

TEST_CASE("pose apply") {
  CHECK((Pose::identity() * Vec3(1, 0, 0)).isApprox(Vec3(1, 0, 0)));
  CHECK((Pose::from_translation(Vec3(0, 0, 5)) * Vec3(1, 0, 0)).isApprox(Vec3(1, 0, 5)));
  CHECK((Pose::from_rotation(rot_z(kPi / 2)) * Vec3(1, 0, 0)).isApprox(Vec3(0, 1, 0), 1e-12));
}

TEST_CASE("pose exp/log") {
  CHECK(Pose::exp(Vec6::Zero()).isApprox(Pose::identity(), 1e-15));

  Vec6 quarter_turn = Vec6::Zero();
  quarter_turn(2) = kPi / 2;
  CHECK(Pose::exp(quarter_turn).isApprox(Pose::from_rotation(rot_z(kPi / 2)), 1e-12));

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> angle(0.0, 3.1);
  double max_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec6 tangent;
    tangent.head<3>() = angle(rng) * random_unit_vector(rng);
    tangent.tail<3>() = random_vector(rng, 10.0);
    const Vec6 back = Pose::exp(tangent).log();
    max_err = std::max(max_err, (back - tangent).norm());
  }
  CHECK(max_err < 1e-10);
}

TEST_CASE("compose is associative and consistent with apply") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Pose c = random_pose(rng);
    CHECK(((a * b) * c).isApprox(a * (b * c), 1e-12));

    const Vec3 p = random_vector(rng, 10.0);
    CHECK(((a * b) * p).isApprox(a * (b * p), 1e-12));
  }
}

TEST_CASE("rotation_from_direction_pairs") {
  const Vec3 ex(1, 0, 0), ey(0, 1, 0), ez(0, 0, 1);

  CHECK(rotation_from_direction_pairs({ex, ey}, {ex, ey}).isApprox(Rotation(), 1e-12));
  CHECK(rotation_from_direction_pairs({ex, ez}, {ey, ez}).isApprox(rot_z(kPi / 2), 1e-12));

  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const Rotation truth = random_rotation(rng);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 5; ++i) {
      src.push_back(random_unit_vector(rng));
      dst.push_back(truth * src.back());
    }
    const Rotation recovered = rotation_from_direction_pairs(src, dst);
    CHECK(recovered.angle_to(truth) < 1e-10);
    CHECK(recovered.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rotation_from_direction_pairs degeneracy") {
  const Vec3 ex(1, 0, 0);
  CHECK_THROWS_AS(rotation_from_direction_pairs({ex, ex, -ex}, {ex, ex, -ex}), CalibError);
  try {
    rotation_from_direction_pairs({ex, ex}, {ex, ex});
    FAIL("expected DegenerateDirections");
  } catch (const CalibError& e) {
    CHECK(e.code() == ErrorCode::DegenerateDirections);
  }
  CHECK_THROWS_AS(rotation_from_direction_pairs({ex}, {ex}), CalibError);
}

TEST_CASE("fit_plane exact") {
  const PlaneFit unit_square =
      fit_plane({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)});
  CHECK(std::abs(unit_square.plane.normal().z()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(unit_square.plane.offset() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(unit_square.rms == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(23);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) {
    const Vec3 v = random_vector(rng, 3.0);
    pts.emplace_back(v.x(), v.y(), 2.0);
  }
  const PlaneFit z2 = fit_plane(pts);
  CHECK(z2.plane.normal().isApprox(Vec3(0, 0, 1), 1e-9));
  CHECK(z2.plane.offset() == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(z2.rms < 1e-12);
}

TEST_CASE("fit_plane under noise recovers the generating plane") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 normal = random_unit_vector(rng);
    const Vec3 anchor = random_vector(rng, 2.0);
    const Plane truth = Plane::from_point_normal(anchor, normal);

    // orthonormal in-plane basis
    const Vec3 u = normal.cross(std::abs(normal.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0)).normalized();
    const Vec3 v = normal.cross(u);

    std::uniform_real_distribution<double> span(-1.0, 1.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 200; ++i) {
      pts.push_back(anchor + span(rng) * u + span(rng) * v + noise(rng) * normal);
    }
    const PlaneFit fit = fit_plane(pts);
    const double angle =
        std::acos(std::min(1.0, std::abs(fit.plane.normal().dot(truth.normal()))));
    CHECK(angle < 0.5 * kPi / 180.0);
  }
}

TEST_CASE("fit_plane degeneracies") {
  std::vector<Vec3> line;
  for (int i = 0; i < 10; ++i) line.emplace_back(i * 0.5, i * 1.0, i * -0.25);
  try {
    fit_plane(line);
    FAIL("expected DegenerateGeometry");
  } catch (const CalibError& e) {
    CHECK(e.code() == ErrorCode::DegenerateGeometry);
  }
  CHECK_THROWS_AS(fit_plane({Vec3(0, 0, 0), Vec3(1, 1, 1)}), CalibError);
}

TEST_CASE("fit_plane is equivariant under rigid transforms") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    const Vec3 normal = random_unit_vector(rng);
    const Vec3 anchor = random_vector(rng, 2.0);
    const Vec3 u = normal.cross(std::abs(normal.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0)).normalized();
    const Vec3 v = normal.cross(u);
    std::uniform_real_distribution<double> span(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (int i = 0; i < 60; ++i) {
      pts.push_back(anchor + span(rng) * u + span(rng) * v + noise(rng) * normal);
    }

    const Pose t = random_pose(rng);
    std::vector<Vec3> moved;
    for (const Vec3& p : pts) moved.push_back(t * p);

    const PlaneFit direct = fit_plane(moved);
    const PlaneFit transformed = fit_plane(pts);
    CHECK(direct.plane.isApprox(transformed.plane.transformed(t), 1e-9));
    CHECK(direct.rms == doctest::Approx(transformed.rms).epsilon(1e-9));
  }
}

TEST_CASE("fit_plane rms matches per-point distances") {
  std::mt19937_64 rng(37);
  std::vector<Vec3> pts;
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> span(-2.0, 2.0);
  for (int i = 0; i < 120; ++i) pts.emplace_back(span(rng), span(rng), 1.0 + noise(rng));
  const PlaneFit fit = fit_plane(pts);
  double sum_sq = 0.0;
  for (const Vec3& p : pts) {
    const double d = fit.plane.signed_distance(p);
    sum_sq += d * d;
  }
  CHECK(fit.rms == doctest::Approx(std::sqrt(sum_sq / pts.size())).epsilon(1e-12));
}

TEST_CASE("plane canonical sign") {
  const Plane a(Vec3(0, 0, 1), 2.0);
  CHECK(a.offset() <= 0.0);
  CHECK(a.normal().isApprox(Vec3(0, 0, -1)));

  const Plane through_origin(Vec3(0, 0, -1), 0.0);
  CHECK(through_origin.normal().isApprox(Vec3(0, 0, 1)));
  CHECK(through_origin.offset() == 0.0);
}

TEST_CASE("frame tags refuse incompatible composition") {
  FramedPose cam_from_board{Pose::from_translation(Vec3(0, 0, 2)), FrameId::board(),
                            FrameId::camera("front")};
  FramedPose veh_from_cam{Pose::from_translation(Vec3(1, 0, 0)), FrameId::camera("front"),
                          FrameId::vehicle()};

  const FramedPose veh_from_board = veh_from_cam * cam_from_board;
  CHECK(veh_from_board.from == FrameId::board());
  CHECK(veh_from_board.to == FrameId::vehicle());
  CHECK(veh_from_board.pose.translation().isApprox(Vec3(1, 0, 2)));

  try {
    (void)(cam_from_board * veh_from_cam);
    FAIL("expected FrameMismatch");
  } catch (const CalibError& e) {
    CHECK(e.code() == ErrorCode::FrameMismatch);
  }

  CHECK(veh_from_cam.inverse().from == FrameId::vehicle());
}
