#include "maskfuse/diffusion/schedule.hpp"

#include <cmath>

namespace maskfuse {

NoiseSchedule build_schedule(int T, const std::string& kind) {
    if (T < 1) throw ConfigError("build_schedule: T must be >= 1, got " + std::to_string(T));
    if (kind != "linear-beta") throw ConfigError("build_schedule: unknown kind '" + kind + "'");

    NoiseSchedule ns;
    ns.T = T;
    ns.alpha.resize(static_cast<size_t>(T) + 1);
    ns.sigma.resize(static_cast<size_t>(T) + 1);
    double log_prod = 0.0;
    for (int t = 0; t <= T; ++t) {
        double beta = ns.beta_min + (ns.beta_max - ns.beta_min) * static_cast<double>(t) / T;
        log_prod += std::log1p(-beta);
        double a = std::exp(0.5 * log_prod);
        ns.alpha[static_cast<size_t>(t)] = a;
        ns.sigma[static_cast<size_t>(t)] = std::sqrt(1.0 - a * a);
    }
    return ns;
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T)
        throw ConfigError("ddim_timesteps: need 1 <= steps <= T, got steps=" + std::to_string(steps) +
                          " T=" + std::to_string(T));
    std::vector<int> ts(static_cast<size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k)
        ts[static_cast<size_t>(k)] =
            static_cast<int>(std::llround(static_cast<double>(T) * (steps - k) / steps));
    return ts;
}

}  // namespace maskfuse
