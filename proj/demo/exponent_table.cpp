// Passive exponent, 3-hop exponent and guaranteed active boost for a few rho.

#include <cstdio>

#include "lathe/exponents.hpp"

int main() {
  std::printf("%6s %12s %12s %12s %12s %6s\n", "rho", "K_passive", "K_3", "K2_conf", "K2_unconf", "c_rho");
  for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9})
    std::printf("%6.2f %12.6f %12.6f %12.6f %12.6f %6.2f\n", rho, lathe::k_passive(rho),
                lathe::k_t_hop(3, rho), lathe::k2_conf(rho), lathe::k2_unconf(rho), lathe::c_rho_lookup(rho));
}
