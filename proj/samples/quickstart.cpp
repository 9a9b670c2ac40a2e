#include "coinfect/coinfect.hpp"
#include <iostream>

int main() {
  coinfect::ModelParams m;
  m.b = 4;
  m.K = 100;
  m.mu0 = m.mu1 = m.mu2 = m.mu3 = 1;
  m.alpha1 = 0.5;
  m.alpha2 = 0.25;
  m.alpha3 = 0.2;
  m.eta1 = 0.4;
  m.eta2 = 0.1;

  const auto p = coinfect::validate_params(m);
  const auto stable = coinfect::classify_f_stable(p);
  std::cout << to_string(stable.primary()) << ": " << stable.point.transpose() << "\n";

  const auto rep = coinfect::converge_to(p, coinfect::StatePoint(10, 1, 1, 1), stable.point);
  std::cout << "distance " << rep.final_distance << " at T = " << rep.horizon << "\n";

  const auto d = coinfect::sweep_carrying_capacity(m, coinfect::log_grid(1, 200, 400));
  for (const auto& t : d.thresholds)
    std::cout << to_string(t.before) << " -> " << to_string(t.after) << " at K = " << t.k_star << "\n";
}
