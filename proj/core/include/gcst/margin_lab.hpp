#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gcst {

/// Per-instance training loss of the binary alignment problem reduced to a
/// scalar margin d = <x, e1 - e2>:
///   log(1 + e^{-d}) + d * e^{-d/tau} / (1 + e^{-d/tau}),  0 < tau < 1.
/// Evaluated in sigmoid form so large |d| neither overflows nor yields NaN.
double scalar_loss(double d, double tau);

/// dL/dd of scalar_loss. Negative for d > 0, positive for d < 0 and exactly
/// zero at d = 0, so a gradient step always moves the margin away from zero.
double scalar_grad(double d, double tau);

struct GrowthViolation {
  std::size_t instance = 0;
  std::size_t step = 0;
  double before = 0.0;
  double after = 0.0;
};

struct GrowthRun {
  // trajectory[s] holds the margins after s steps; trajectory[0] = initial.
  std::vector<Eigen::VectorXd> trajectory;
  std::optional<GrowthViolation> violation;

  bool strict_growth() const { return !violation.has_value(); }
};

/// Gradient descent d' = d - lr * scalar_grad(d) applied per instance,
/// checking |d'| > |d| at every step. The first violated step is recorded
/// (the run still completes). Margins must be nonzero and tau in (0, 1).
GrowthRun run_margin_growth(const Eigen::VectorXd& initial_margins, double tau,
                            double lr, std::size_t steps);

struct StabilizedGrowth {
  GrowthRun run;
  double lr = 0.0;
  std::size_t halvings = 0;
};

// Halves lr until one full trajectory keeps strict growth. With a too-large
// step the margins jump far enough that the gradient underflows to zero and
// strictness is lost; halving always terminates at desk scale.
StabilizedGrowth stabilized_margin_growth(const Eigen::VectorXd& initial_margins,
                                          double tau, double initial_lr,
                                          std::size_t steps,
                                          std::size_t max_halvings = 60);

struct LabeledPoint {
  Eigen::Vector2d x;
  int label = 1;  // 1 or 2
};

struct MarginOracle {
  Eigen::Vector2d direction;  // unit vector
  double margin = 0.0;        // min_i s_i * <x_i, direction>
};

/// Exact through-origin max-margin direction by enumerating candidate
/// support sets: each signed point alone and each pair with tied margins.
/// margin <= 0 means the set is not linearly separable through the origin.
MarginOracle max_margin_direction(const std::vector<LabeledPoint>& points);

struct BoundedStage {
  double bound = 0.0;
  Eigen::Vector2d e1;
  Eigen::Vector2d e2;
  std::vector<Eigen::VectorXd> margin_steps;  // clipped margins per step
  std::vector<double> min_margin_trajectory;  // m* after each step

  Eigen::Vector2d direction() const;  // normalized e1 - e2
};

struct BoundedRun {
  std::vector<BoundedStage> stages;
};

/// Descent on sum_i scalar_loss(min(m_i, B)) over the prompt embeddings
/// e1, e2, with margins m_i = s_i * <x_i, e1 - e2> capped at B. Instances at
/// the cap stop contributing gradient, so late updates are driven by the
/// smallest margins; steps are gradient-normalized so the cap is actually
/// reached. Stages share parameters across the increasing bound schedule.
/// Throws Error(non_separable) when no separating direction exists.
BoundedRun run_bounded_max_margin(const std::vector<LabeledPoint>& points,
                                  double tau, double step_size,
                                  const std::vector<double>& bounds,
                                  std::size_t steps_per_bound);

double angle_between_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b);

/// Trajectory record for offline plotting, one row per (step, instance):
/// run_id,step,instance,d,loss,grad
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::string& run_id, const GrowthRun& run,
                          double tau);

/// Same column layout for a bounded run; one run_id per stage
/// ("<prefix>_B<bound>"), margins already clipped, gradient zero at the cap.
void write_bounded_csv(const std::filesystem::path& path,
                       const std::string& run_id_prefix, const BoundedRun& run,
                       double tau);

}  // namespace gcst
