"""Monte Carlo race between coherent and TMSV ranging over many probe copies.

Two slots, 10% reflectance, background 2 photons per slot and 0.1 signal
photons per copy.  The entangled probe's error falls faster with the number
of copies; the normalized log error creeps toward each exponent, slowly,
because the error carries a polynomial prefactor.
"""

import math
import sys

from qranging import (
    ChannelParams,
    CoherentProbe,
    Scenario,
    TmsvProbe,
    mc_error_probability,
    xi_coherent_closed,
    xi_quantum,
)


def main(trials=200_000, seed=7):
    ch = ChannelParams(0.1, 2.0)
    mu = 0.1
    xi_c = xi_coherent_closed(ch, mu)
    xi_q, R = xi_quantum(mu, ch)
    print(f"exponents: coherent {xi_c:.4g}, TMSV {xi_q:.4g} nats per copy (R = {R})")
    print(f"{'L':>6} {'p_coh':>10} {'p_tmsv':>10} {'-ln p/L coh':>12} {'-ln p/L tmsv':>13}")
    for L in (1, 10, 100, 300, 1000):
        coh = mc_error_probability(Scenario(2, L, CoherentProbe(mu), ch), "max_total", trials, seed)
        tm = mc_error_probability(Scenario(2, L, TmsvProbe(mu, 1000), ch), "idler_correlation", trials, seed)
        rate = [(-math.log(e.p_hat) / L) if e.errors else math.inf for e in (coh, tm)]
        print(f"{L:6d} {coh.p_hat:10.4g} {tm.p_hat:10.4g} {rate[0]:12.4g} {rate[1]:13.4g}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 200_000)
