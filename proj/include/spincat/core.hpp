// Shared parameter types, detuning generation and seeding for the spin-ensemble
// simulators. All rates and times are in units of the two-excitation loss rate
// Gamma_2 unless a field says otherwise.
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace spincat {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration, detected before any compute.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Integrator breakdown (step-size underflow, non-finite state).
class NumericalError : public Error {
public:
    using Error::Error;
};

struct EnsembleParams {
    int n_spins = 1;
    double eta = 0.0;       // squeezing strength
    double gamma2 = 1.0;    // collective two-excitation loss rate
    double phase_phi = 0.0; // squeezing phase

    /// Rejects n_spins < 1, gamma2 < 0 and non-finite values. gamma2 = 0 is
    /// allowed so the free-evolution limit can be run through the same code.
    void validate() const;
};

struct Identical {
    double delta0 = 0.0;
};
struct TwoGroup {
    double delta = 0.0;
};
struct Gaussian {
    double sigma = 0.0;
};
using DetuningModel = std::variant<Identical, TwoGroup, Gaussian>;

std::string describe(const DetuningModel& model);

struct SpinCoherentParams {
    double theta = 0.0; // polar angle, [0, pi)
    double phi = 0.0;   // azimuth
};

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::size_t realization_count = 1;
};

/// One round of the SplitMix64 output function.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of realization `index` under `master`:
///   splitmix64(splitmix64(master) ^ (index * 0xD1B54A32D192ED03)).
/// Realizations can therefore be generated in any order or on any thread.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master) ^ (index * 0xD1B54A32D192ED03ULL));
}

/// Standard normal deviates from mt19937_64 bits via the Box-Muller transform.
/// Uniforms use the top 53 bits; u1 is shifted into (0, 1] so log(u1) is
/// finite. Deviates are produced in pairs (r cos, r sin) and consumed in order.
/// std::normal_distribution is avoided because its algorithm is
/// implementation-defined.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}
    double operator()();

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Per-spin detunings. TwoGroup puts +delta on the first n/2 spins and -delta
/// on the rest and needs even n. Pure function of its arguments.
std::vector<double> sample_detunings(const DetuningModel& model, int n, std::uint64_t seed);

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    std::size_t n_points = 2;

    void validate() const;
    double at(std::size_t i) const;
    std::vector<double> times() const;
};

} // namespace spincat
