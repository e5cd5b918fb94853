#pragma once

#include <cmath>
#include <vector>

#include "rbm/model.hpp"
#include "rbm/rng.hpp"

namespace rbm::test {

// Small builder so each test states only what it cares about.
struct ModelBuilder {
    SystemModel::Params p;

    ModelBuilder(std::size_t d, std::size_t n, std::size_t batch)
    {
        p.d = d;
        p.n_particles = n;
        p.batch_size = batch;
    }
    ModelBuilder& kernel(Interaction k)
    {
        p.kernel.interaction = std::move(k);
        return *this;
    }
    ModelBuilder& drift(Drift b)
    {
        p.kernel.drift = std::move(b);
        return *this;
    }
    ModelBuilder& masses(std::vector<double> m)
    {
        p.masses = std::move(m);
        return *this;
    }
    ModelBuilder& charges(std::vector<int> z)
    {
        p.species.charges = std::move(z);
        return *this;
    }
    ModelBuilder& labels(std::vector<int> l)
    {
        p.species.labels = std::move(l);
        return *this;
    }
    ModelBuilder& sigma(double s)
    {
        p.sigma = s;
        return *this;
    }
    ModelBuilder& time(double t_final, double tau)
    {
        p.final_time = t_final;
        p.tau = tau;
        return *this;
    }
    ModelBuilder& second_order(double gamma)
    {
        p.dynamics = SecondOrder{gamma};
        return *this;
    }
    ModelBuilder& positions(std::vector<double> x)
    {
        p.initial.positions = ExplicitInit{std::move(x)};
        return *this;
    }
    SystemModel build() const { return SystemModel(p); }
};

inline ParticleState state_of(std::vector<double> x, std::vector<double> v = {})
{
    ParticleState s;
    s.x = std::move(x);
    s.v = std::move(v);
    return s;
}

inline std::vector<double> normals(std::size_t n, std::uint64_t seed, double scale = 1.0)
{
    RngStream rng(seed, {StreamPurpose::Sampling, 99, 0});
    std::vector<double> out(n);
    for (double& v : out) v = scale * rng.normal();
    return out;
}

inline std::vector<double> uniforms(std::size_t n, std::uint64_t seed, double lo, double hi)
{
    RngStream rng(seed, {StreamPurpose::Sampling, 98, 0});
    std::vector<double> out(n);
    for (double& v : out) v = lo + (hi - lo) * rng.uniform();
    return out;
}

inline double rel_diff(double a, double b)
{
    return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

}  // namespace rbm::test
