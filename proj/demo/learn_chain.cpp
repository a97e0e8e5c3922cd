// One passive and one active run on the same chain and budget.

#include <iostream>

#include "lathe/active_lathe.hpp"
#include "lathe/graph_metrics.hpp"

int main() {
  const std::size_t p = 200;
  const std::uint64_t n = 120;
  const lathe::IsingTreeModel model(lathe::build_chain(p), 0.9);
  lathe::IsingOracle oracle(model);
  const lathe::RngSeed seed(2024);

  const auto passive = lathe::passive_scl(oracle, n, seed.derive({0}));
  const auto passive_tree = passive.topology();
  std::cout << "passive: " << (passive_tree == model.topology() ? "exact" : "wrong") << ", hop errors";
  for (auto [t, c] : lathe::t_hop_classify(passive_tree, model.topology()).counts) std::cout << ' ' << t << 'x' << c;
  std::cout << '\n';

  const auto active = lathe::active_lathe(oracle, p, n, seed.derive({1}));
  std::cout << "active:  " << (active.tree == model.topology() ? "exact" : "wrong") << ", alpha "
            << active.alpha.value() << ", rho_hat " << active.rho_hat << ", unconfident nodes "
            << active.confidence.p_tilde() << ", spent " << active.ledger.spent() << " of "
            << active.ledger.total() << '\n';
  for (const auto& a : active.ledger.log())
    std::cout << "  " << a.stage << ": " << a.samples << " samples x " << a.nodes.size() << " nodes\n";
}
