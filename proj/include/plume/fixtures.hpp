#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

// Seeded synthetic monitoring datasets. Output depends only on the seed: the
// generator is mt19937_64 and normals come from Box-Muller, not
// std::normal_distribution, whose output differs between standard libraries.
namespace plume::fixtures {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// File name -> content for "basic" (8 wells, 3 solutes, 12 quarterly events)
// or "comprehensive" (25 wells, 5 solutes, GW, NAPL, 24 events, overlays).
std::map<std::string, std::string> generate(const std::string& name);

} // namespace plume::fixtures
