#include "rigcal/camera.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "ba_core.hpp"
#include "rigcal/lm.hpp"

namespace rigcal {

CameraIntrinsics::ParamVector CameraIntrinsics::params() const {
  ParamVector p;
  p << xi, fx, fy, cx, cy, k1, k2, p1, p2;
  return p;
}

CameraIntrinsics CameraIntrinsics::from_params(const ParamVector& p, int width, int height) {
  CameraIntrinsics intr;
  intr.xi = p(0);
  intr.fx = p(1);
  intr.fy = p(2);
  intr.cx = p(3);
  intr.cy = p(4);
  intr.k1 = p(5);
  intr.k2 = p(6);
  intr.p1 = p(7);
  intr.p2 = p(8);
  intr.width = width;
  intr.height = height;
  return intr;
}

void CameraIntrinsics::validate() const {
  if (!params().allFinite()) {
    throw_error(ErrorCode::InvalidArgument, "intrinsics contain non-finite values");
  }
  if (fx <= 0.0 || fy <= 0.0) {
    throw_error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  }
  if (xi < 0.0) {
    throw_error(ErrorCode::InvalidArgument, "mirror parameter xi must be non-negative");
  }
  if (width <= 0 || height <= 0) {
    throw_error(ErrorCode::InvalidArgument, "image size must be positive");
  }
}

void CheckerboardSpec::validate() const {
  if (inner_rows < 2 || inner_cols < 2) {
    throw_error(ErrorCode::InvalidArgument, "checkerboard needs at least a 2x2 corner grid");
  }
  if (inner_rows == inner_cols) {
    throw_error(ErrorCode::InvalidArgument,
                "checkerboard rows and columns must differ to disambiguate orientation");
  }
  if (!(square_size > 0.0) || !std::isfinite(square_size)) {
    throw_error(ErrorCode::InvalidArgument, "square size must be positive");
  }
}

std::vector<Vec3> board_points(const CheckerboardSpec& spec) {
  spec.validate();
  std::vector<Vec3> points;
  points.reserve(spec.corner_count());
  for (int r = 0; r < spec.inner_rows; ++r) {
    for (int c = 0; c < spec.inner_cols; ++c) {
      points.emplace_back(c * spec.square_size, r * spec.square_size, 0.0);
    }
  }
  return points;
}

namespace {

struct DistortionEval {
  Vec2 distorted;
  Eigen::Matrix2d d_m;  // derivative w.r.t. the undistorted coordinates
};

Vec2 apply_distortion(const CameraIntrinsics& intr, const Vec2& m) {
  const double mx = m.x(), my = m.y();
  const double r2 = mx * mx + my * my;
  const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  return Vec2(radial * mx + 2.0 * intr.p1 * mx * my + intr.p2 * (r2 + 2.0 * mx * mx),
              radial * my + intr.p1 * (r2 + 2.0 * my * my) + 2.0 * intr.p2 * mx * my);
}

DistortionEval apply_distortion_jac(const CameraIntrinsics& intr, const Vec2& m) {
  const double mx = m.x(), my = m.y();
  const double r2 = mx * mx + my * my;
  const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  const double g = intr.k1 + 2.0 * intr.k2 * r2;  // d radial / d r2

  DistortionEval out;
  out.distorted = apply_distortion(intr, m);
  out.d_m(0, 0) = radial + 2.0 * g * mx * mx + 2.0 * intr.p1 * my + 6.0 * intr.p2 * mx;
  out.d_m(0, 1) = 2.0 * g * mx * my + 2.0 * intr.p1 * mx + 2.0 * intr.p2 * my;
  out.d_m(1, 0) = out.d_m(0, 1);
  out.d_m(1, 1) = radial + 2.0 * g * my * my + 6.0 * intr.p1 * my + 2.0 * intr.p2 * mx;
  return out;
}

struct ProjectionCore {
  bool valid = false;
  Vec3 sphere = Vec3::Zero();  // point on the unit sphere
  double inv_depth = 0.0;      // 1 / (sphere.z + xi)
  Vec2 m = Vec2::Zero();       // undistorted normalized coordinates
};

ProjectionCore project_core(const CameraIntrinsics& intr, const Vec3& point) {
  ProjectionCore core;
  const double norm = point.norm();
  if (!(norm > 0.0) || !point.allFinite()) return core;
  if (intr.xi == 0.0) {
    if (!(point.z() > 0.0)) return core;
  } else if (!(point.z() + intr.xi * norm > 0.0)) {
    return core;
  }
  core.sphere = point / norm;
  const double depth = core.sphere.z() + intr.xi;
  if (!(depth > 1e-12)) return core;
  core.inv_depth = 1.0 / depth;
  core.m = core.sphere.head<2>() * core.inv_depth;
  core.valid = true;
  return core;
}

}  // namespace

bool projectable(const CameraIntrinsics& intr, const Vec3& point) {
  return project_core(intr, point).valid;
}

Vec2 project(const CameraIntrinsics& intr, const Vec3& point) {
  const ProjectionCore core = project_core(intr, point);
  if (!core.valid) {
    throw_error(ErrorCode::BehindCamera, "point violates the projection precondition");
  }
  const Vec2 md = apply_distortion(intr, core.m);
  return Vec2(intr.fx * md.x() + intr.cx, intr.fy * md.y() + intr.cy);
}

Vec3 unproject(const CameraIntrinsics& intr, const Vec2& pixel) {
  const Vec2 target((pixel.x() - intr.cx) / intr.fx, (pixel.y() - intr.cy) / intr.fy);

  Vec2 m = target;
  bool converged = false;
  for (int i = 0; i < 50; ++i) {
    const double r2 = m.squaredNorm();
    const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
    const Vec2 tangential(
        2.0 * intr.p1 * m.x() * m.y() + intr.p2 * (r2 + 2.0 * m.x() * m.x()),
        intr.p1 * (r2 + 2.0 * m.y() * m.y()) + 2.0 * intr.p2 * m.x() * m.y());
    const Vec2 next = (target - tangential) / radial;
    const double change = (next - m).lpNorm<Eigen::Infinity>();
    m = next;
    if (change < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged || !m.allFinite()) {
    throw_error(ErrorCode::NoConvergence, "distortion inversion did not converge");
  }

  const double r2 = m.squaredNorm();
  const double disc = 1.0 + (1.0 - intr.xi * intr.xi) * r2;
  if (!(disc >= 0.0)) {
    throw_error(ErrorCode::NoConvergence, "pixel is outside the unified model's domain");
  }
  const double factor = (intr.xi + std::sqrt(disc)) / (1.0 + r2);
  return Vec3(factor * m.x(), factor * m.y(), factor - intr.xi).normalized();
}

ProjectionJacobians project_jacobians(const CameraIntrinsics& intr, const Vec3& point) {
  const ProjectionCore core = project_core(intr, point);
  if (!core.valid) {
    throw_error(ErrorCode::BehindCamera, "point violates the projection precondition");
  }
  const DistortionEval dist = apply_distortion_jac(intr, core.m);

  ProjectionJacobians out;
  out.pixel = Vec2(intr.fx * dist.distorted.x() + intr.cx,
                   intr.fy * dist.distorted.y() + intr.cy);

  const Eigen::DiagonalMatrix<double, 2> focal(intr.fx, intr.fy);

  // chain: pixel <- distorted <- m <- sphere <- point
  Eigen::Matrix<double, 2, 3> d_m_sphere;
  d_m_sphere << core.inv_depth, 0.0, -core.m.x() * core.inv_depth,  //
      0.0, core.inv_depth, -core.m.y() * core.inv_depth;
  const Mat3 d_sphere_point =
      (Mat3::Identity() - core.sphere * core.sphere.transpose()) / point.norm();

  const Eigen::Matrix2d d_pix_m = focal * dist.d_m;
  out.d_point = d_pix_m * d_m_sphere * d_sphere_point;

  // intrinsics, ordered (xi, fx, fy, cx, cy, k1, k2, p1, p2)
  const double mx = core.m.x(), my = core.m.y();
  const double r2 = core.m.squaredNorm();
  out.d_intrinsics.setZero();
  out.d_intrinsics.col(0) = d_pix_m * (-core.inv_depth * core.m);
  out.d_intrinsics(0, 1) = dist.distorted.x();
  out.d_intrinsics(1, 2) = dist.distorted.y();
  out.d_intrinsics(0, 3) = 1.0;
  out.d_intrinsics(1, 4) = 1.0;
  out.d_intrinsics(0, 5) = intr.fx * mx * r2;
  out.d_intrinsics(1, 5) = intr.fy * my * r2;
  out.d_intrinsics(0, 6) = intr.fx * mx * r2 * r2;
  out.d_intrinsics(1, 6) = intr.fy * my * r2 * r2;
  out.d_intrinsics(0, 7) = intr.fx * 2.0 * mx * my;
  out.d_intrinsics(1, 7) = intr.fy * (r2 + 2.0 * my * my);
  out.d_intrinsics(0, 8) = intr.fx * (r2 + 2.0 * mx * mx);
  out.d_intrinsics(1, 8) = intr.fy * 2.0 * mx * my;

  out.d_pose.leftCols<3>() = out.d_point * (-skew(point));
  out.d_pose.rightCols<3>() = out.d_point;
  return out;
}

namespace {

// Direct linear transform with isotropic normalization of both point sets.
// Maps src (board plane coordinates) to dst.
Eigen::Matrix3d fit_homography(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  const int n = static_cast<int>(src.size());

  auto normalizer = [](const std::vector<Vec2>& pts) {
    Vec2 mean = Vec2::Zero();
    for (const Vec2& p : pts) mean += p;
    mean /= pts.size();
    double scale = 0.0;
    for (const Vec2& p : pts) scale += (p - mean).norm();
    scale = scale > 1e-12 ? std::sqrt(2.0) * pts.size() / scale : 1.0;
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 0) = t(1, 1) = scale;
    t(0, 2) = -scale * mean.x();
    t(1, 2) = -scale * mean.y();
    return t;
  };

  const Eigen::Matrix3d t_src = normalizer(src);
  const Eigen::Matrix3d t_dst = normalizer(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d s = t_src * Eigen::Vector3d(src[i].x(), src[i].y(), 1.0);
    const Eigen::Vector3d d = t_dst * Eigen::Vector3d(dst[i].x(), dst[i].y(), 1.0);
    a.row(2 * i) << -s.x(), -s.y(), -1.0, 0.0, 0.0, 0.0, d.x() * s.x(), d.x() * s.y(), d.x();
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -s.x(), -s.y(), -1.0, d.y() * s.x(), d.y() * s.y(), d.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return t_dst.inverse() * hn * t_src;
}

// Pose candidate from a plane-to-normalized-image homography (board z = 0).
Pose pose_from_homography(const Eigen::Matrix3d& h, const std::vector<Vec3>& board_pts) {
  const Eigen::Vector3d h1 = h.col(0);
  const Eigen::Vector3d h2 = h.col(1);
  const double scale = 2.0 / (h1.norm() + h2.norm());

  Eigen::Vector3d r1 = scale * h1;
  Eigen::Vector3d r2 = scale * h2;
  Eigen::Vector3d t = scale * h.col(2);

  Mat3 approx;
  approx.col(0) = r1;
  approx.col(1) = r2;
  approx.col(2) = r1.cross(r2);
  Eigen::JacobiSVD<Mat3> svd(approx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();

  // Choose the sign placing the board in front of the camera.
  double mean_depth = 0.0;
  for (const Vec3& p : board_pts) mean_depth += (r * p + t).z();
  if (mean_depth < 0.0) {
    // negating h flips r1, r2 and t while keeping r3
    Mat3 flipped = approx;
    flipped.col(0) *= -1.0;
    flipped.col(1) *= -1.0;
    Eigen::JacobiSVD<Mat3> svd2(flipped, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d2 = Mat3::Identity();
    d2(2, 2) = (svd2.matrixU() * svd2.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    r = svd2.matrixU() * d2 * svd2.matrixV().transpose();
    t = -t;
  }
  return Pose(Rotation::from_matrix(r), t);
}

// Reprojection problem over a single board pose.
class BoardPoseProblem : public LmProblem {
 public:
  BoardPoseProblem(const CameraIntrinsics& intr, const std::vector<Vec3>& points,
                   const std::vector<Vec2>& pixels, Pose initial)
      : intr_(intr), points_(points), pixels_(pixels), pose_(std::move(initial)) {}

  int residual_size() const override { return static_cast<int>(points_.size()) * 2; }
  int tangent_size() const override { return 6; }

  bool eval(Eigen::VectorXd* residuals, Eigen::MatrixXd* jacobian) const override {
    for (size_t i = 0; i < points_.size(); ++i) {
      const Vec3 pc = pose_ * points_[i];
      if (!projectable(intr_, pc)) return false;
      if (jacobian) {
        const ProjectionJacobians j = project_jacobians(intr_, pc);
        residuals->segment<2>(2 * i) = j.pixel - pixels_[i];
        jacobian->block<2, 6>(2 * i, 0) = j.d_pose;
      } else {
        residuals->segment<2>(2 * i) = project(intr_, pc) - pixels_[i];
      }
    }
    return true;
  }

  void apply_step(const Eigen::VectorXd& delta) override {
    pose_ = Pose::exp(delta) * pose_;
  }
  void save_state() override { saved_ = pose_; }
  void restore_state() override { pose_ = saved_; }

  const Pose& pose() const { return pose_; }

 private:
  const CameraIntrinsics& intr_;
  const std::vector<Vec3>& points_;
  const std::vector<Vec2>& pixels_;
  Pose pose_;
  Pose saved_;
};

void check_view(const ViewObservation& view, const CheckerboardSpec& spec) {
  if (view.corners.size() < 4) {
    throw_error(ErrorCode::InvalidArgument, "board pose needs at least 4 corners");
  }
  std::set<int> ids;
  for (const CornerObservation& c : view.corners) {
    if (c.corner_id < 0 || c.corner_id >= spec.corner_count()) {
      throw_error(ErrorCode::InvalidArgument, "corner id outside the board grid");
    }
    if (!ids.insert(c.corner_id).second) {
      throw_error(ErrorCode::InvalidArgument, "duplicate corner id in view");
    }
    if (!c.pixel.allFinite()) {
      throw_error(ErrorCode::InvalidArgument, "non-finite corner pixel");
    }
  }
}

double reprojection_rms(const CameraIntrinsics& intr, const Pose& pose,
                        const std::vector<Vec3>& points, const std::vector<Vec2>& pixels) {
  double sum_sq = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    sum_sq += (project(intr, pose * points[i]) - pixels[i]).squaredNorm();
  }
  return std::sqrt(sum_sq / (2.0 * points.size()));
}

}  // namespace

BoardPoseEstimate estimate_board_pose(const CameraIntrinsics& intr,
                                      const ViewObservation& view,
                                      const CheckerboardSpec& spec) {
  intr.validate();
  check_view(view, spec);
  const std::vector<Vec3> grid = board_points(spec);

  std::vector<Vec3> points;
  std::vector<Vec2> pixels;
  std::vector<Vec2> board2d;
  std::vector<Vec2> normalized;
  for (const CornerObservation& c : view.corners) {
    const Vec3 ray = unproject(intr, c.pixel);
    if (ray.z() < 1e-9) continue;  // beyond the hemisphere the DLT can represent
    points.push_back(grid[c.corner_id]);
    pixels.push_back(c.pixel);
    board2d.emplace_back(grid[c.corner_id].x(), grid[c.corner_id].y());
    normalized.emplace_back(ray.x() / ray.z(), ray.y() / ray.z());
  }
  if (points.size() < 4) {
    throw_error(ErrorCode::DegenerateGeometry, "fewer than 4 usable corners in view");
  }

  // collinear board points cannot fix a homography
  Vec2 mean = Vec2::Zero();
  for (const Vec2& b : board2d) mean += b;
  mean /= board2d.size();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Vec2& b : board2d) cov += (b - mean) * (b - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  if (eig.eigenvalues()(0) < 1e-12 * std::max(eig.eigenvalues()(1), 1e-12)) {
    throw_error(ErrorCode::DegenerateGeometry, "observed board corners are collinear");
  }

  const Eigen::Matrix3d h = fit_homography(board2d, normalized);
  const Pose init = pose_from_homography(h, points);

  BoardPoseProblem problem(intr, points, pixels, init);
  LmOptions pose_opts;
  pose_opts.max_iterations = 200;
  const LmSummary summary = lm_minimize(problem, pose_opts);
  if (!summary.converged) {
    throw_error(ErrorCode::NoConvergence, "board pose refinement did not converge");
  }
  return BoardPoseEstimate{problem.pose(),
                           reprojection_rms(intr, problem.pose(), points, pixels)};
}

namespace {

// Zhang-style closed-form pinhole initialization from board homographies.
struct ClosedFormInit {
  double fx, fy, cx, cy;
};

ClosedFormInit intrinsics_from_homographies(const std::vector<Eigen::Matrix3d>& hs) {
  auto v_row = [](const Eigen::Matrix3d& h, int i, int j) {
    Eigen::Matrix<double, 6, 1> v;
    v << h(0, i) * h(0, j), h(0, i) * h(1, j) + h(1, i) * h(0, j), h(1, i) * h(1, j),
        h(2, i) * h(0, j) + h(0, i) * h(2, j), h(2, i) * h(1, j) + h(1, i) * h(2, j),
        h(2, i) * h(2, j);
    return v;
  };

  Eigen::MatrixXd a(2 * hs.size(), 6);
  for (size_t i = 0; i < hs.size(); ++i) {
    a.row(2 * i) = v_row(hs[i], 0, 1).transpose();
    a.row(2 * i + 1) = (v_row(hs[i], 0, 0) - v_row(hs[i], 1, 1)).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const Eigen::Matrix<double, 6, 1> b = svd.matrixV().col(5);

  const double b11 = b(0), b12 = b(1), b22 = b(2), b13 = b(3), b23 = b(4), b33 = b(5);
  const double denom = b11 * b22 - b12 * b12;
  if (std::abs(denom) < 1e-18 || std::abs(b11) < 1e-18) {
    throw_error(ErrorCode::DegenerateGeometry,
                "board orientations do not constrain the intrinsics");
  }
  const double cy = (b12 * b13 - b11 * b23) / denom;
  const double lambda = b33 - (b13 * b13 + cy * (b12 * b13 - b11 * b23)) / b11;
  const double fx2 = lambda / b11;
  const double fy2 = lambda * b11 / denom;
  if (!(fx2 > 0.0) || !(fy2 > 0.0)) {
    throw_error(ErrorCode::DegenerateGeometry,
                "closed-form intrinsic initialization is not positive definite");
  }
  const double fx = std::sqrt(fx2);
  const double fy = std::sqrt(fy2);
  const double cx = -b13 * fx * fx / lambda;
  return ClosedFormInit{fx, fy, cx, cy};
}

double total_rms(const CameraIntrinsics& intr, const std::vector<Pose>& poses,
                 const std::vector<std::vector<Vec3>>& points,
                 const std::vector<std::vector<Vec2>>& pixels) {
  double sum_sq = 0.0;
  int count = 0;
  for (size_t v = 0; v < poses.size(); ++v) {
    for (size_t i = 0; i < points[v].size(); ++i) {
      sum_sq += (project(intr, poses[v] * points[v][i]) - pixels[v][i]).squaredNorm();
      count += 2;
    }
  }
  return std::sqrt(sum_sq / count);
}

}  // namespace

IntrinsicsCalibration calibrate_intrinsics(const std::vector<ViewObservation>& views,
                                           const CheckerboardSpec& spec, int width,
                                           int height) {
  spec.validate();
  if (views.size() < 3) {
    throw_error(ErrorCode::InsufficientViews,
                "intrinsic calibration needs at least 3 views, got " +
                    std::to_string(views.size()));
  }
  for (const ViewObservation& v : views) {
    check_view(v, spec);
    if (v.camera_id != views.front().camera_id) {
      throw_error(ErrorCode::InvalidArgument, "views mix observations from different cameras");
    }
  }

  const std::vector<Vec3> grid = board_points(spec);
  std::vector<std::vector<Vec3>> points(views.size());
  std::vector<std::vector<Vec2>> pixels(views.size());
  std::vector<Eigen::Matrix3d> homographies;
  for (size_t v = 0; v < views.size(); ++v) {
    std::vector<Vec2> board2d;
    for (const CornerObservation& c : views[v].corners) {
      points[v].push_back(grid[c.corner_id]);
      pixels[v].push_back(c.pixel);
      board2d.emplace_back(grid[c.corner_id].x(), grid[c.corner_id].y());
    }
    homographies.push_back(fit_homography(board2d, pixels[v]));
  }

  // All-parallel boards leave the focal lengths unobservable. The
  // board-to-board map H_0^-1 H_i is affine exactly when the two planes are
  // parallel, so a vanishing perspective row across all views flags the
  // degenerate arrangement without knowing the intrinsics.
  {
    const Eigen::Matrix3d h0_inv = homographies.front().inverse();
    bool all_parallel = true;
    for (size_t i = 1; i < homographies.size(); ++i) {
      Eigen::Matrix3d g = h0_inv * homographies[i];
      if (std::abs(g(2, 2)) < 1e-15) {
        all_parallel = false;  // affine part vanished; strongly perspective
        break;
      }
      g /= g(2, 2);
      const double perspective = std::hypot(g(2, 0), g(2, 1));
      if (perspective > 1e-8) {
        all_parallel = false;
        break;
      }
    }
    if (all_parallel) {
      throw_error(ErrorCode::DegenerateGeometry,
                  "all board views are parallel; intrinsics are unobservable");
    }
  }

  const ClosedFormInit init = intrinsics_from_homographies(homographies);

  std::vector<ba::Observation> observations;
  int residual_count = 0;
  for (size_t v = 0; v < views.size(); ++v) {
    for (size_t i = 0; i < points[v].size(); ++i) {
      observations.push_back({0, static_cast<int>(v), points[v][i], pixels[v][i]});
      residual_count += 2;
    }
  }

  CameraIntrinsics intr;
  intr.fx = init.fx;
  intr.fy = init.fy;
  intr.cx = init.cx;
  intr.cy = init.cy;
  intr.width = width;
  intr.height = height;

  std::vector<ba::Camera> cameras{{intr, Pose::identity(), /*pose_fixed=*/true}};
  std::vector<ba::Board> boards;
  for (size_t v = 0; v < views.size(); ++v) {
    Pose pose;
    try {
      pose = estimate_board_pose(intr, views[v], spec).board_to_camera;
    } catch (const CalibError&) {
      // wide-lens retry: the pinhole initialization can put extreme views
      // outside its own domain
      CameraIntrinsics wide = intr;
      wide.xi = 1.0;
      wide.fx *= 2.0;
      wide.fy *= 2.0;
      try {
        pose = estimate_board_pose(wide, views[v], spec).board_to_camera;
      } catch (const CalibError&) {
        throw_error(ErrorCode::NoConvergence,
                    "could not initialize the pose of view " + std::to_string(v));
      }
    }
    boards.push_back({pose});
  }

  ba::Config config;
  config.refine_intrinsics = true;
  config.lm.max_iterations = 400;

  IntrinsicsCalibration result;
  result.initial_rms =
      std::sqrt(ba::total_cost(cameras, boards, observations, config) / residual_count);

  // The mirror offset, focal lengths and polynomial distortion are close to
  // a functional reparameterization of each other at moderate fields of
  // view, so a fully joint fit can wander. Each stage below is
  // identifiable on its own: focal/principal first, then xi with the
  // distortion frozen, then distortion with xi frozen.
  config.intrinsics_mask = {false, true, true, true, true, false, false, false, false};
  const ba::Outcome stage_focal = ba::solve(cameras, boards, observations, config);

  config.intrinsics_mask = {true, true, true, true, true, false, false, false, false};
  const ba::Outcome stage_mirror = ba::solve(cameras, boards, observations, config);

  config.intrinsics_mask = {false, true, true, true, true, true, true, true, true};
  const ba::Outcome stage_distortion = ba::solve(cameras, boards, observations, config);

  const std::vector<ba::Camera> anchor_cameras = cameras;
  const std::vector<ba::Board> anchor_boards = boards;
  const CameraIntrinsics& anchor = anchor_cameras.front().intrinsics;

  result.iterations = stage_focal.summary.iterations + stage_mirror.summary.iterations +
                      stage_distortion.summary.iterations;
  result.converged = stage_distortion.summary.converged;
  result.intrinsics = anchor;
  for (const ba::Board& b : anchor_boards) result.view_poses.push_back(b.pose);

  // Joint polish over all nine parameters. When the captures pin the full
  // family (noiseless data), one of the seeds below lands in the exact
  // basin and reaches the numerical noise floor; that result replaces the
  // staged anchor. Under measurement noise no seed reaches the floor and
  // the anchor stands, which keeps the reported parameters on the
  // identifiable sheet instead of drifting along the valley.
  config.intrinsics_mask.fill(true);
  config.lm.max_iterations = 300;
  constexpr double kJointAcceptRms = 0.01;  // pixels

  double best_cost = std::numeric_limits<double>::infinity();
  const double xi_seeds[] = {anchor.xi, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2};
  for (const double xi_seed : xi_seeds) {
    std::vector<ba::Camera> trial_cameras = anchor_cameras;
    std::vector<ba::Board> trial_boards = anchor_boards;
    CameraIntrinsics& ti = trial_cameras.front().intrinsics;
    const double focal_rescale = (1.0 + xi_seed) / (1.0 + anchor.xi);
    ti.xi = xi_seed;
    ti.fx *= focal_rescale;
    ti.fy *= focal_rescale;

    ba::Outcome polish;
    try {
      // condition the seed: everything but xi first, then the joint fit
      config.intrinsics_mask = {false, true, true, true, true, true, true, true, true};
      ba::solve(trial_cameras, trial_boards, observations, config);
      config.intrinsics_mask.fill(true);
      polish = ba::solve(trial_cameras, trial_boards, observations, config);
    } catch (const CalibError&) {
      continue;
    }
    const double rms = std::sqrt(polish.summary.final_cost / residual_count);
    const CameraIntrinsics& pi = trial_cameras.front().intrinsics;
    const bool in_envelope = pi.xi >= 0.0 && pi.xi <= 2.5 && std::abs(pi.k1) <= 0.5 &&
                             std::abs(pi.k2) <= 0.5 && std::abs(pi.p1) <= 0.05 &&
                             std::abs(pi.p2) <= 0.05;
    if (rms < kJointAcceptRms && in_envelope && polish.summary.final_cost < best_cost) {
      best_cost = polish.summary.final_cost;
      result.intrinsics = pi;
      result.view_poses.clear();
      for (const ba::Board& b : trial_boards) result.view_poses.push_back(b.pose);
      result.converged = polish.summary.converged;
      result.iterations += polish.summary.iterations;
    }
  }

  result.rms = total_rms(result.intrinsics, result.view_poses, points, pixels);
  return result;
}

}  // namespace rigcal
