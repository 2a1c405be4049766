"""
Demo 2: picking a rate from an imperfect channel estimate

For one vehicle speed we build the mismatch model, then for a few known
gains compare the exactly optimised rate with the closed-form one and the
two bounds (perfect CSIT, no CSIT). Watch the closed-form rate drift off
once s grows past about 5, where its Q1 fit no longer holds.

Run with ``python3 demos/02_rate_adaptation.py``.
"""

from dataclasses import replace

from pa_linksim.channel import SystemConfig, build_mismatch, conditional_gain, temporal_combine
from pa_linksim.montecarlo import KMH
from pa_linksim.rate_adapt import optimal_rate_approx, optimal_rate_exact, rate_no_csit


def main(v_kmh=117.0, snr_db=25.0, beta=1.0):
    cfg = SystemConfig(snr_db=snr_db, beta=beta, velocity_mps=v_kmh * KMH)
    m = build_mismatch(cfg)
    mean_scale, sigma = temporal_combine(m, cfg.beta)
    print(f"v = {v_kmh} km/h (matched speed {cfg.matched_velocity_mps / KMH:.2f} km/h), SNR = {snr_db} dB")
    print(f"  mismatch d = {m.effective_distance_m * 1e3:.3f} mm, rho = {m.rho:.6f}, sigma = {sigma:.4f}\n")

    p = cfg.p_lin
    print(f"{'|H_hat|^2':>10} {'s':>7} {'R exact':>9} {'thr exact':>10} {'R approx':>9} {'thr approx':>11}")
    for mag2 in (0.1, 0.5, 1.0, 2.0, 4.0):
        cg = conditional_gain(mag2**0.5, mean_scale, sigma)
        ex = optimal_rate_exact(cg, p)
        ap = optimal_rate_approx(cg, p)
        print(
            f"{mag2:10.2f} {cg.s:7.2f} {ex.rate_npcu:9.4f} {ex.expected_throughput_npcu:10.4f}"
            f" {ap.rate_npcu:9.4f} {ap.expected_throughput_npcu:11.4f}  {ap.method}"
        )
    no = rate_no_csit(p)
    print(f"\nNo CSIT: fixed rate {no.rate_npcu:.4f} npcu, throughput {no.expected_throughput_npcu:.4f}")

    # at the matched speed the estimate is perfect and sigma collapses
    cfg0 = replace(cfg, velocity_mps=cfg.matched_velocity_mps)
    print(f"At the matched speed sigma = {temporal_combine(build_mismatch(cfg0), 1.0)[1]:.2e}")


if __name__ == "__main__":
    main()
    print()
    main(v_kmh=117.0, snr_db=5.0)
