#include "gcst/margin_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "gcst/error.hpp"

namespace gcst {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {  // log(1 + e^z)
  if (z > 0.0) {
    return z + std::log1p(std::exp(-z));
  }
  return std::log1p(std::exp(z));
}

void check_margin_tau(double tau) {
  if (!(tau > 0.0) || !(tau < 1.0)) {
    throw_invalid("margin lab: tau must lie strictly inside (0, 1)");
  }
}

}  // namespace

double scalar_loss(double d, double tau) {
  check_margin_tau(tau);
  // log(1+e^{-d}) + d * e^{-d/tau}/(1+e^{-d/tau}), written with softplus and
  // sigmoid so neither factor overflows for large |d|.
  return softplus(-d) + d * sigmoid(-d / tau);
}

double scalar_grad(double d, double tau) {
  check_margin_tau(tau);
  const double sp = sigmoid(d / tau);
  const double sn = sigmoid(-d / tau);
  // -(d e^{-d/tau}) / (tau (e^{-d/tau}+1)^2)
  //   + (e^{-d/tau} - e^{-d}) / ((e^{-d/tau}+1)(e^{-d}+1))
  return -(d / tau) * sp * sn + sn * sigmoid(d) - sigmoid(-d) * sp;
}

GrowthRun run_margin_growth(const Eigen::VectorXd& initial_margins, double tau,
                            double lr, std::size_t steps) {
  check_margin_tau(tau);
  if (!(lr > 0.0)) {
    throw_invalid("run_margin_growth: lr must be positive");
  }
  if (initial_margins.size() == 0 || !initial_margins.allFinite()) {
    throw_invalid("run_margin_growth: invalid initial margins");
  }
  for (Eigen::Index i = 0; i < initial_margins.size(); ++i) {
    if (initial_margins[i] == 0.0) {
      // d = 0 is a stationary point; the sign analysis needs nonzero margins.
      throw_invalid("run_margin_growth: margin " + std::to_string(i) +
                    " is exactly zero");
    }
  }

  GrowthRun run;
  run.trajectory.reserve(steps + 1);
  run.trajectory.push_back(initial_margins);

  Eigen::VectorXd d = initial_margins;
  for (std::size_t step = 1; step <= steps; ++step) {
    Eigen::VectorXd next(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      next[i] = d[i] - lr * scalar_grad(d[i], tau);
      if (!run.violation &&
          !(std::abs(next[i]) > std::abs(d[i]))) {
        run.violation = GrowthViolation{static_cast<std::size_t>(i), step,
                                        d[i], next[i]};
      }
    }
    run.trajectory.push_back(next);
    d = std::move(next);
  }
  return run;
}

StabilizedGrowth stabilized_margin_growth(const Eigen::VectorXd& initial_margins,
                                          double tau, double initial_lr,
                                          std::size_t steps,
                                          std::size_t max_halvings) {
  double lr = initial_lr;
  StabilizedGrowth result;
  for (std::size_t h = 0; h <= max_halvings; ++h) {
    result.run = run_margin_growth(initial_margins, tau, lr, steps);
    result.lr = lr;
    result.halvings = h;
    if (result.run.strict_growth()) {
      return result;
    }
    lr *= 0.5;
  }
  return result;  // last attempt, violation still recorded
}

MarginOracle max_margin_direction(const std::vector<LabeledPoint>& points) {
  if (points.empty()) {
    throw_invalid("max_margin_direction: empty point set");
  }
  std::vector<Eigen::Vector2d> signed_points;
  signed_points.reserve(points.size());
  for (const auto& p : points) {
    if (p.label != 1 && p.label != 2) {
      throw_invalid("max_margin_direction: labels must be 1 or 2");
    }
    signed_points.push_back(p.label == 1 ? p.x : Eigen::Vector2d(-p.x));
  }

  // The best unit direction either aligns with one signed point or ties the
  // margins of two of them, so those candidates suffice in two dimensions.
  std::vector<Eigen::Vector2d> candidates;
  for (const auto& a : signed_points) {
    if (a.norm() > 1e-12) {
      candidates.push_back(a.normalized());
      candidates.push_back(-a.normalized());
    }
  }
  for (std::size_t i = 0; i < signed_points.size(); ++i) {
    for (std::size_t j = i + 1; j < signed_points.size(); ++j) {
      const Eigen::Vector2d diff = signed_points[i] - signed_points[j];
      if (diff.norm() > 1e-12) {
        const Eigen::Vector2d perp =
            Eigen::Vector2d(-diff.y(), diff.x()).normalized();
        candidates.push_back(perp);
        candidates.push_back(-perp);
      }
    }
  }

  MarginOracle best;
  best.direction = Eigen::Vector2d(1.0, 0.0);
  best.margin = -std::numeric_limits<double>::infinity();
  for (const auto& w : candidates) {
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& a : signed_points) {
      margin = std::min(margin, a.dot(w));
    }
    if (margin > best.margin) {
      best.margin = margin;
      best.direction = w;
    }
  }
  return best;
}

Eigen::Vector2d BoundedStage::direction() const {
  const Eigen::Vector2d w = e1 - e2;
  const double n = w.norm();
  return n > 0.0 ? Eigen::Vector2d(w / n) : w;
}

BoundedRun run_bounded_max_margin(const std::vector<LabeledPoint>& points,
                                  double tau, double step_size,
                                  const std::vector<double>& bounds,
                                  std::size_t steps_per_bound) {
  check_margin_tau(tau);
  if (!(step_size > 0.0)) {
    throw_invalid("run_bounded_max_margin: step size must be positive");
  }
  if (bounds.empty()) {
    throw_invalid("run_bounded_max_margin: empty bound schedule");
  }
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (!(bounds[i] > 0.0) || (i > 0 && !(bounds[i] > bounds[i - 1]))) {
      throw_invalid("run_bounded_max_margin: bounds must be positive and "
                    "strictly increasing");
    }
  }
  const MarginOracle oracle = max_margin_direction(points);
  if (!(oracle.margin > 0.0)) {
    throw Error(ErrorCode::non_separable,
                "run_bounded_max_margin: points are not linearly separable");
  }

  std::vector<Eigen::Vector2d> signed_points;
  signed_points.reserve(points.size());
  Eigen::Vector2d c1 = Eigen::Vector2d::Zero();
  Eigen::Vector2d c2 = Eigen::Vector2d::Zero();
  int n1 = 0, n2 = 0;
  for (const auto& p : points) {
    signed_points.push_back(p.label == 1 ? p.x : Eigen::Vector2d(-p.x));
    if (p.label == 1) {
      c1 += p.x;
      ++n1;
    } else {
      c2 += p.x;
      ++n2;
    }
  }
  Eigen::Vector2d e1 = n1 > 0 ? Eigen::Vector2d(0.05 * c1 / n1)
                              : Eigen::Vector2d::Zero();
  Eigen::Vector2d e2 = n2 > 0 ? Eigen::Vector2d(0.05 * c2 / n2)
                              : Eigen::Vector2d::Zero();
  if ((e1 - e2).norm() < 1e-9) {
    e1 += Eigen::Vector2d(0.01, 0.017);  // symmetric centroids; nudge off zero
  }

  BoundedRun run;
  for (double bound : bounds) {
    BoundedStage stage;
    stage.bound = bound;
    for (std::size_t step = 0; step < steps_per_bound; ++step) {
      const Eigen::Vector2d w = e1 - e2;
      Eigen::Vector2d grad = Eigen::Vector2d::Zero();
      for (const auto& a : signed_points) {
        const double m = a.dot(w);
        if (m < bound) {
          grad += scalar_grad(m, tau) * a;  // capped instances contribute none
        }
      }
      const double gnorm = grad.norm();
      if (gnorm < 1e-300) {
        break;  // every margin at the cap
      }
      // Normalized step: the raw gradient decays exponentially in the
      // margins, so a fixed-length step is what lets margins actually
      // approach the bound.
      const Eigen::Vector2d delta = (step_size / gnorm) * grad;
      e1 -= delta;
      e2 += delta;

      const Eigen::Vector2d w_next = e1 - e2;
      Eigen::VectorXd margins(static_cast<Eigen::Index>(signed_points.size()));
      for (std::size_t i = 0; i < signed_points.size(); ++i) {
        margins[static_cast<Eigen::Index>(i)] =
            std::min(signed_points[i].dot(w_next), bound);
      }
      stage.margin_steps.push_back(margins);
      stage.min_margin_trajectory.push_back(margins.minCoeff());
    }
    stage.e1 = e1;
    stage.e2 = e2;
    run.stages.push_back(std::move(stage));
  }
  return run;
}

double angle_between_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw_invalid("angle_between_deg: zero vector");
  }
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::string& run_id, const GrowthRun& run,
                          double tau) {
  std::ostringstream body;
  body << "run_id,step,instance,d,loss,grad\n";
  char buf[64];
  for (std::size_t step = 0; step < run.trajectory.size(); ++step) {
    const auto& d = run.trajectory[step];
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      body << run_id << "," << step << "," << i;
      std::snprintf(buf, sizeof(buf), ",%.17g", d[i]);
      body << buf;
      std::snprintf(buf, sizeof(buf), ",%.17g", scalar_loss(d[i], tau));
      body << buf;
      std::snprintf(buf, sizeof(buf), ",%.17g", scalar_grad(d[i], tau));
      body << buf << "\n";
    }
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::io_error,
                  "write_trajectory_csv: cannot open " + path.string());
    }
    out << body.str();
  }
  std::filesystem::rename(tmp, path);
}

void write_bounded_csv(const std::filesystem::path& path,
                       const std::string& run_id_prefix, const BoundedRun& run,
                       double tau) {
  std::ostringstream body;
  body << "run_id,step,instance,d,loss,grad\n";
  char buf[64];
  for (const auto& stage : run.stages) {
    std::ostringstream run_id;
    run_id << run_id_prefix << "_B" << stage.bound;
    for (std::size_t step = 0; step < stage.margin_steps.size(); ++step) {
      const auto& margins = stage.margin_steps[step];
      for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double m = margins[i];
        const double grad = m < stage.bound ? scalar_grad(m, tau) : 0.0;
        body << run_id.str() << "," << step << "," << i;
        std::snprintf(buf, sizeof(buf), ",%.17g", m);
        body << buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", scalar_loss(m, tau));
        body << buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", grad);
        body << buf << "\n";
      }
    }
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::io_error,
                  "write_bounded_csv: cannot open " + path.string());
    }
    out << body.str();
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gcst
