#pragma once

#include "fbmpc/common.hpp"

namespace fbmpc {

/// One active phase followed by one swing phase of a single foot.
struct ContactPhase {
  double active_duration = 0.0;
  double inactive_duration = 0.0;
  Vector2d touchdown_target = Vector2d::Zero();  ///< placement at the end of the swing
  double swing_height = 0.1;                     ///< apex of the cycloidal swing
};

struct FootSchedule {
  Vector2d initial_placement = Vector2d::Zero();
  std::vector<ContactPhase> phases;
};

/// Swing-foot reference sample.
struct SwingReference {
  Vector2d position = Vector2d::Zero();
  Vector2d velocity = Vector2d::Zero();
};

/// Per-foot active/inactive phase sequence starting at `start_time`. After its
/// last phase a foot stays in stance for `final_stance` seconds.
class ContactSchedule {
public:
  double start_time = 0.0;
  double final_stance = 0.0;
  std::vector<FootSchedule> feet;

  int num_feet() const { return static_cast<int>(feet.size()); }

  void validate() const {
    for (const auto& f : feet) {
      for (const auto& p : f.phases) {
        if (p.active_duration < 0.0 || p.inactive_duration < 0.0) {
          throw InvalidConfig("contact phase durations must be >= 0");
        }
        if (p.swing_height < 0.0) throw InvalidConfig("swing height must be >= 0");
      }
    }
    if (final_stance < 0.0) throw InvalidConfig("final stance duration must be >= 0");
  }

  /// End of the covered time interval.
  double end_time() const {
    double longest = 0.0;
    for (const auto& f : feet) {
      double t = 0.0;
      for (const auto& p : f.phases) t += p.active_duration + p.inactive_duration;
      longest = std::max(longest, t);
    }
    return start_time + longest + final_stance;
  }

  bool active(int foot, double t) const {
    double a, b;
    return swing_window(foot, t, a, b) < 0;
  }

  /// Stance placement of `foot` at time t (the last touchdown target).
  Vector2d placement(int foot, double t) const {
    const FootSchedule& f = feet.at(foot);
    Vector2d p = f.initial_placement;
    double clock = start_time;
    for (const auto& ph : f.phases) {
      clock += ph.active_duration + ph.inactive_duration;
      if (clock > t) break;
      if (ph.inactive_duration > 0.0) p = ph.touchdown_target;
    }
    return p;
  }

  /// Cycloidal swing reference; valid while the foot is inactive.
  SwingReference swing(int foot, double t) const {
    double t0, t1;
    const int idx = swing_window(foot, t, t0, t1);
    SwingReference ref;
    if (idx < 0) {
      ref.position = placement(foot, t);
      return ref;
    }
    const FootSchedule& f = feet[foot];
    const ContactPhase& ph = f.phases[idx];
    const Vector2d from = idx == 0 ? f.initial_placement : liftoff_placement(foot, idx);
    const Vector2d to = ph.touchdown_target;
    const double T = t1 - t0;
    const double s = std::clamp((t - t0) / T, 0.0, 1.0);
    const double two_pi = 2.0 * M_PI;
    const double prog = s - std::sin(two_pi * s) / two_pi;
    const double dprog = (1.0 - std::cos(two_pi * s)) / T;
    ref.position = from + prog * (to - from);
    ref.velocity = dprog * (to - from);
    ref.position.y() += 0.5 * ph.swing_height * (1.0 - std::cos(two_pi * s));
    ref.velocity.y() += 0.5 * ph.swing_height * two_pi * std::sin(two_pi * s) / T;
    return ref;
  }

  /// Touchdown instants of every foot (absolute time).
  std::vector<double> touchdowns(int foot) const {
    std::vector<double> out;
    double clock = start_time;
    for (const auto& ph : feet.at(foot).phases) {
      clock += ph.active_duration + ph.inactive_duration;
      if (ph.inactive_duration > 0.0) out.push_back(clock);
    }
    return out;
  }

private:
  // Index of the phase whose swing contains t (half-open [liftoff, touchdown)), or -1.
  int swing_window(int foot, double t, double& t0, double& t1) const {
    const FootSchedule& f = feet.at(foot);
    double clock = start_time;
    for (std::size_t i = 0; i < f.phases.size(); ++i) {
      const ContactPhase& ph = f.phases[i];
      t0 = clock + ph.active_duration;
      t1 = t0 + ph.inactive_duration;
      if (ph.inactive_duration > 0.0 && t >= t0 && t < t1) return static_cast<int>(i);
      clock = t1;
    }
    return -1;
  }

  Vector2d liftoff_placement(int foot, int phase) const {
    const FootSchedule& f = feet[foot];
    Vector2d p = f.initial_placement;
    for (int i = 0; i < phase; ++i) {
      if (f.phases[i].inactive_duration > 0.0) p = f.phases[i].touchdown_target;
    }
    return p;
  }
};

}  // namespace fbmpc
