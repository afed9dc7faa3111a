// Simulates a three-activity cascade (0 self-excites and triggers 1, 1
// triggers 2), fits it back with MAP-EM and prints what was recovered.

#include <mphp/mphp.hpp>

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
    const double horizon = argc > 1 ? std::atof(argv[1]) : 2000.0;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;

    mphp::MphpParams truth = mphp::MphpParams::poisson({0.2, 0.0, 0.0});
    truth.excitation(0, 0) = 0.5;
    truth.excitation(0, 1) = 0.5;
    truth.excitation(1, 2) = 0.5;

    const auto seq = mphp::simulate(truth, horizon, seed);
    const auto counts = seq.counts_by_type();
    std::printf("simulated %zu events (%zu / %zu / %zu by type)\n", seq.size(), counts[0], counts[1], counts[2]);

    const auto fit = mphp::fit_map_em(seq, mphp::GammaPriors::flat(3));
    std::printf("EM: %zu iterations, converged=%d, log-posterior %.6f\n", fit.iterations, fit.converged,
                fit.trace.back());
    std::printf("mu    = %.4f %.4f %.4f\n", fit.params.mu[0], fit.params.mu[1], fit.params.mu[2]);
    for (std::size_t p = 0; p < 3; ++p) {
        std::printf("A[%zu,:] = %.4f %.4f %.4f\n", p, fit.params.alpha(p, 0), fit.params.alpha(p, 1),
                    fit.params.alpha(p, 2));
    }
    std::printf("spectral radius %.4f\n", mphp::spectral_radius(fit.params.excitation));

    std::printf("first events and their likeliest parents:\n");
    for (std::size_t i = 0; i < std::min<std::size_t>(seq.size(), 10); ++i) {
        const auto parent = fit.branching.likeliest_parent(i);
        if (parent == i) {
            std::printf("  #%zu t=%.3f type %zu  <- background (p=%.3f)\n", i, seq[i].t, seq[i].type,
                        fit.branching.background(i));
        } else {
            std::printf("  #%zu t=%.3f type %zu  <- #%zu (p=%.3f)\n", i, seq[i].t, seq[i].type, parent,
                        fit.branching(i, parent));
        }
    }
    return 0;
}
