#include "ba_core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "rigcal/errors.hpp"

namespace rigcal::ba {

namespace {

struct Layout {
  std::vector<int> pose_offset;  // per camera; -1 when fixed
  std::vector<int> intr_offset;  // per camera; -1 when intrinsics are frozen
  std::vector<int> free_intr;    // indices of movable intrinsic parameters
  int camera_dim = 0;
};

Layout make_layout(const std::vector<Camera>& cameras, const Config& config) {
  Layout layout;
  layout.pose_offset.assign(cameras.size(), -1);
  layout.intr_offset.assign(cameras.size(), -1);
  int dim = 0;
  for (size_t c = 0; c < cameras.size(); ++c) {
    if (!cameras[c].pose_fixed) {
      layout.pose_offset[c] = dim;
      dim += 6;
    }
  }
  if (config.refine_intrinsics) {
    for (int k = 0; k < CameraIntrinsics::kNumParams; ++k) {
      if (config.intrinsics_mask[k]) layout.free_intr.push_back(k);
    }
    if (!layout.free_intr.empty()) {
      for (size_t c = 0; c < cameras.size(); ++c) {
        layout.intr_offset[c] = dim;
        dim += static_cast<int>(layout.free_intr.size());
      }
    }
  }
  layout.camera_dim = dim;
  return layout;
}

// Huber weight on the 2-vector corner residual; the residual and its
// Jacobian rows are scaled so the Gauss-Newton system matches the robust
// objective to first order.
double huber_weight(const Vec2& r, double scale) {
  const double norm = r.norm();
  return norm <= scale ? 1.0 : std::sqrt(scale / norm);
}

double robust_cost_term(const Vec2& r, const Config& config) {
  const double u = r.squaredNorm();
  if (!config.robust) return u;
  const double k = config.huber_scale;
  const double norm = std::sqrt(u);
  return norm <= k ? u : 2.0 * k * norm - k * k;
}

// Camera-frame point and its derivative blocks for one observation.
struct ResidualEval {
  bool valid = false;
  Vec2 residual = Vec2::Zero();
  Eigen::Matrix<double, 2, 6> j_cam;    // camera pose tangent
  Eigen::Matrix<double, 2, 6> j_board;  // board pose tangent
  Eigen::Matrix<double, 2, 9> j_intr;
};

ResidualEval eval_observation(const Camera& cam, const Board& board, const Observation& obs,
                              bool with_jacobians) {
  ResidualEval out;
  const Vec3 w = board.pose * obs.board_point;  // reference frame
  const Vec3 q = cam.pose.inverse() * w;        // camera frame
  if (!projectable(cam.intrinsics, q)) return out;

  if (!with_jacobians) {
    out.residual = project(cam.intrinsics, q) - obs.pixel;
    out.valid = true;
    return out;
  }

  const ProjectionJacobians pj = project_jacobians(cam.intrinsics, q);
  out.residual = pj.pixel - obs.pixel;

  const Mat3 r_t = cam.pose.rotation().inverse().matrix();
  const Mat3 w_skew = skew(w);
  Eigen::Matrix<double, 3, 6> dq_board;
  dq_board.leftCols<3>() = -r_t * w_skew;
  dq_board.rightCols<3>() = r_t;
  out.j_board = pj.d_point * dq_board;
  out.j_cam = -out.j_board;
  out.j_intr = pj.d_intrinsics;
  out.valid = true;
  return out;
}

struct NormalEquations {
  Eigen::MatrixXd a;                 // camera block of J^T J
  Eigen::VectorXd g_cam;             // camera block of J^T r
  std::vector<Eigen::Matrix<double, 6, 6>> d;  // board diagonal blocks
  std::vector<Vec6> g_board;
  std::vector<Eigen::MatrixXd> b;    // camera x board cross blocks
  double cost = 0.0;
};

bool build_normal_equations(const std::vector<Camera>& cameras,
                            const std::vector<Board>& boards,
                            const std::vector<Observation>& observations,
                            const Config& config, const Layout& layout,
                            NormalEquations* eq) {
  eq->a.setZero(layout.camera_dim, layout.camera_dim);
  eq->g_cam.setZero(layout.camera_dim);
  eq->d.assign(boards.size(), Eigen::Matrix<double, 6, 6>::Zero());
  eq->g_board.assign(boards.size(), Vec6::Zero());
  eq->b.assign(boards.size(), Eigen::MatrixXd::Zero(layout.camera_dim, 6));
  eq->cost = 0.0;

  const int n_intr = static_cast<int>(layout.free_intr.size());

  for (const Observation& obs : observations) {
    const Camera& cam = cameras[obs.camera];
    const ResidualEval ev = eval_observation(cam, boards[obs.board], obs, true);
    if (!ev.valid || !ev.residual.allFinite()) return false;

    eq->cost += robust_cost_term(ev.residual, config);

    double weight = 1.0;
    if (config.robust) weight = huber_weight(ev.residual, config.huber_scale);

    const Vec2 r = weight * ev.residual;
    const Eigen::Matrix<double, 2, 6> jb = weight * ev.j_board;
    const int po = layout.pose_offset[obs.camera];
    const int io = layout.intr_offset[obs.camera];

    eq->d[obs.board] += jb.transpose() * jb;
    eq->g_board[obs.board] += jb.transpose() * r;

    if (po >= 0) {
      const Eigen::Matrix<double, 2, 6> jc = weight * ev.j_cam;
      eq->a.block<6, 6>(po, po) += jc.transpose() * jc;
      eq->g_cam.segment<6>(po) += jc.transpose() * r;
      eq->b[obs.board].middleRows<6>(po) += jc.transpose() * jb;
    }
    if (io >= 0) {
      Eigen::Matrix<double, 2, Eigen::Dynamic> ji(2, n_intr);
      for (int k = 0; k < n_intr; ++k) ji.col(k) = weight * ev.j_intr.col(layout.free_intr[k]);
      eq->a.block(io, io, n_intr, n_intr) += ji.transpose() * ji;
      eq->g_cam.segment(io, n_intr) += ji.transpose() * r;
      eq->b[obs.board].middleRows(io, n_intr) += ji.transpose() * jb;
      if (po >= 0) {
        const Eigen::Matrix<double, 2, 6> jc = weight * ev.j_cam;
        const Eigen::MatrixXd cross = jc.transpose() * ji;  // 6 x n_intr
        eq->a.block(po, io, 6, n_intr) += cross;
        eq->a.block(io, po, n_intr, 6) += cross.transpose();
      }
    }
  }
  return true;
}

bool eval_cost(const std::vector<Camera>& cameras, const std::vector<Board>& boards,
               const std::vector<Observation>& observations, const Config& config,
               double* cost) {
  *cost = 0.0;
  for (const Observation& obs : observations) {
    const ResidualEval ev =
        eval_observation(cameras[obs.camera], boards[obs.board], obs, false);
    if (!ev.valid || !ev.residual.allFinite()) return false;
    *cost += robust_cost_term(ev.residual, config);
  }
  return std::isfinite(*cost);
}

void apply_step(const Layout& layout, const Eigen::VectorXd& delta_cam,
                const std::vector<Vec6>& delta_board, std::vector<Camera>* cameras,
                std::vector<Board>* boards) {
  const int n_intr = static_cast<int>(layout.free_intr.size());
  for (size_t c = 0; c < cameras->size(); ++c) {
    Camera& cam = (*cameras)[c];
    if (layout.pose_offset[c] >= 0) {
      cam.pose = Pose::exp(delta_cam.segment<6>(layout.pose_offset[c])) * cam.pose;
    }
    if (layout.intr_offset[c] >= 0) {
      CameraIntrinsics::ParamVector p = cam.intrinsics.params();
      for (int k = 0; k < n_intr; ++k) {
        p(layout.free_intr[k]) += delta_cam(layout.intr_offset[c] + k);
      }
      cam.intrinsics =
          CameraIntrinsics::from_params(p, cam.intrinsics.width, cam.intrinsics.height);
    }
  }
  for (size_t b = 0; b < boards->size(); ++b) {
    (*boards)[b].pose = Pose::exp(delta_board[b]) * (*boards)[b].pose;
  }
}

}  // namespace

double total_cost(const std::vector<Camera>& cameras, const std::vector<Board>& boards,
                  const std::vector<Observation>& observations, const Config& config) {
  double cost = 0.0;
  if (!eval_cost(cameras, boards, observations, config, &cost)) {
    throw_error(ErrorCode::NumericalFailure, "state does not evaluate to finite residuals");
  }
  return cost;
}

Outcome solve(std::vector<Camera>& cameras, std::vector<Board>& boards,
              const std::vector<Observation>& observations, const Config& config) {
  const Layout layout = make_layout(cameras, config);
  const LmOptions& opts = config.lm;

  NormalEquations eq;
  if (!build_normal_equations(cameras, boards, observations, config, layout, &eq)) {
    throw_error(ErrorCode::NumericalFailure, "residuals are invalid at the initial state");
  }

  Outcome outcome;
  outcome.summary.initial_cost = eq.cost;
  outcome.summary.final_cost = eq.cost;
  double lambda = opts.lambda_init;

  const int n_boards = static_cast<int>(boards.size());

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    // gradient stationarity over every free parameter
    double grad_inf = eq.g_cam.size() > 0 ? eq.g_cam.lpNorm<Eigen::Infinity>() : 0.0;
    for (const Vec6& g : eq.g_board) {
      grad_inf = std::max(grad_inf, g.lpNorm<Eigen::Infinity>());
    }
    if (grad_inf < opts.gradient_tolerance) {
      outcome.summary.stop = LmStop::GradientSmall;
      outcome.summary.converged = true;
      return outcome;
    }

    bool accepted = false;
    while (!accepted) {
      // damp, eliminate board blocks, solve the reduced camera system
      Eigen::MatrixXd s = eq.a;
      s.diagonal() += lambda * eq.a.diagonal().cwiseMax(1e-12);
      Eigen::VectorXd rhs = -eq.g_cam;

      std::vector<Eigen::Matrix<double, 6, 6>> d_inv(n_boards);
      bool factor_ok = true;
      for (int b = 0; b < n_boards; ++b) {
        Eigen::Matrix<double, 6, 6> db = eq.d[b];
        db.diagonal() += lambda * eq.d[b].diagonal().cwiseMax(1e-12);
        const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(db);
        if (ldlt.info() != Eigen::Success) {
          factor_ok = false;
          break;
        }
        d_inv[b] = ldlt.solve(Eigen::Matrix<double, 6, 6>::Identity());
        s -= eq.b[b] * d_inv[b] * eq.b[b].transpose();
        rhs += eq.b[b] * (d_inv[b] * eq.g_board[b]);
      }

      Eigen::VectorXd delta_cam(layout.camera_dim);
      std::vector<Vec6> delta_board(n_boards);
      bool ok = factor_ok;
      if (ok && layout.camera_dim > 0) {
        delta_cam = s.ldlt().solve(rhs);
        ok = delta_cam.allFinite();
      } else if (layout.camera_dim == 0) {
        delta_cam.resize(0);
      }
      if (ok) {
        for (int b = 0; b < n_boards; ++b) {
          Vec6 rhs_b = -eq.g_board[b];
          if (layout.camera_dim > 0) rhs_b -= eq.b[b].transpose() * delta_cam;
          delta_board[b] = d_inv[b] * rhs_b;
          if (!delta_board[b].allFinite()) {
            ok = false;
            break;
          }
        }
      }

      double trial_cost = 0.0;
      std::vector<Camera> trial_cameras;
      std::vector<Board> trial_boards;
      if (ok) {
        trial_cameras = cameras;
        trial_boards = boards;
        apply_step(layout, delta_cam, delta_board, &trial_cameras, &trial_boards);
        ok = eval_cost(trial_cameras, trial_boards, observations, config, &trial_cost);
      }

      if (ok && trial_cost < outcome.summary.final_cost) {
        accepted = true;
        cameras = std::move(trial_cameras);
        boards = std::move(trial_boards);
        lambda = std::max(lambda / opts.lambda_scale, 1e-18);
        const double previous = outcome.summary.final_cost;
        outcome.summary.final_cost = trial_cost;
        outcome.summary.iterations = iter + 1;
        const double decrease = (previous - trial_cost) / std::max(previous, 1e-300);
        if (decrease < opts.cost_tolerance) {
          outcome.summary.stop = LmStop::CostStalled;
          outcome.summary.converged = true;
          return outcome;
        }
      } else {
        lambda *= opts.lambda_scale;
        if (lambda > 1e32) {
          outcome.summary.stop = LmStop::LambdaOverflow;
          outcome.summary.converged = true;
          return outcome;
        }
      }
    }

    if (!build_normal_equations(cameras, boards, observations, config, layout, &eq)) {
      throw_error(ErrorCode::NumericalFailure, "accepted state failed to re-evaluate");
    }
  }

  outcome.summary.stop = LmStop::MaxIterations;
  outcome.summary.converged = false;
  return outcome;
}

}  // namespace rigcal::ba
