#pragma once

#include <memory>

#include "smpheat/smpheat.hpp"

namespace smpheat::test {

/// Small default-family model: K = M = 8 on 32 grid points.
inline ModelSpec small_spec() {
    ModelSpec s;
    s.T = 0.25;
    s.K = 8;
    s.n_x = 32;
    s.n_steps = 32;
    s.M = 8;
    s.N = 4;
    return s;
}

/// Noise switched off and drift disabled: pure semigroup dynamics.
inline ModelSpec quiet_spec() {
    ModelSpec s = small_spec();
    s.drift_enabled = false;
    s.s0 = s.s1 = s.s2 = 0.0;
    return s;
}

inline NoiseGrid noise_for(const Problem& pb, std::size_t paths, std::uint64_t seed = 11) {
    return sample_noise(seed, paths, pb.steps(), pb.M(), pb.dt());
}

inline SharedEnsemble reference(const Problem& pb, const ControlField& u, const NoiseGrid& noise) {
    return std::make_shared<PathEnsemble>(simulate_state(pb, u, noise));
}

inline ModeVector unit(std::size_t size, std::size_t k) {
    ModeVector v = ModeVector::Zero(static_cast<Eigen::Index>(size));
    v(static_cast<Eigen::Index>(k)) = 1.0;
    return v;
}

}  // namespace smpheat::test
