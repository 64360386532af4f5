"""Exact single-shot error of coherent ranging against probe brightness.

With no light the receiver guesses, so the error starts at ``1 - 1/m``.
The table shows how quickly each slot count leaves that plateau, and the
last block checks a few points against brute-force slot enumeration.
"""

import numpy as np

from qranging import ChannelParams, CoherentProbe, Scenario, enumerate_error_probability, p_err_single_shot


def main():
    kappa, mu_B = 0.1, 1.0
    mus = np.logspace(-2, 2, 9)
    print(f"kappa = {kappa}, mu_B = {mu_B}")
    print("mu      " + "".join(f"{'m=' + str(m):>14}" for m in (2, 10, 100)))
    for mu in mus:
        row = "".join(f"{p_err_single_shot(m, kappa, mu, mu_B):14.6g}" for m in (2, 10, 100))
        print(f"{mu:<8.3g}{row}")
    print()
    print("closed form vs enumeration (m = 3):")
    for mu in (1.0, 10.0, 40.0):
        s = Scenario(3, 1, CoherentProbe(mu), ChannelParams(kappa, mu_B))
        exact = p_err_single_shot(3, kappa, mu, mu_B)
        brute = enumerate_error_probability(s, "max_total")
        print(f"  mu = {mu:5g}: {exact:.12g}  {brute:.12g}")


if __name__ == "__main__":
    main()
