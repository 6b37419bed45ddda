#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mpctune {

// Dense strictly convex QP:  min 0.5 u'Hu + f'u  s.t.  G u <= h.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_constraints() const { return static_cast<int>(G.rows()); }
  double objective(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(H * u) + f.dot(u);
  }
};

struct QpSettings {
  double feas_tol = 1e-10;       // constraint violation considered zero
  double dependency_tol = 1e-11; // step direction norm considered zero
  int max_iterations = 0;        // 0: 10*m + 100
  int refine_steps = 2;          // iterative refinement of the final KKT solve
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

struct QpSolution {
  QpStatus status = QpStatus::Optimal;
  Eigen::VectorXd u;
  Eigen::VectorXd duals;          // full length m, zero off the active set
  std::vector<int> active_set;    // ascending constraint indices
  double kkt_residual = 0.0;      // max of stationarity/feasibility/comp-slack
  double objective = 0.0;
  int iterations = 0;
};

// Goldfarb-Idnani dual active-set method. Starts from the unconstrained
// minimizer and adds the most-violated constraint (lowest index on ties), so
// the solve is deterministic for fixed inputs. The primal objective is
// non-decreasing across iterations; termination is finite for H > 0.
QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings = {});

// Infinity-norm KKT residual (stationarity, primal/dual feasibility,
// complementary slackness) of a candidate primal/dual pair.
double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& duals);

}  // namespace mpctune
