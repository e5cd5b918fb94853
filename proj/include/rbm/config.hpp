#pragma once

#include <filesystem>
#include <string>

#include "rbm/model.hpp"

namespace rbm {

/*!
 * Builds a SystemModel from a JSON document:
 *
 *   {
 *     "d": 1, "N": 500, "p": 2,
 *     "weights": [..] | {"uniform": m} | {"seeded_range": [lo, hi], "seed": s},
 *     "species": {"charges": [..], "labels": [..]},
 *     "kernel": {"name": "gaussian_envelope", "params": {"a": 1, "s": 1}},
 *     "drift": {"name": "linear", "params": {"kappa": 1}, "beta": -1, "q": 1},
 *     "sigma": 1, "dynamics": "first" | {"second": {"gamma": g}},
 *     "T": 1, "tau": 0.125,
 *     "initial": {"positions": ..., "velocities": ...}
 *   }
 *
 * Unknown fields are rejected at every level with InvalidArgument.
 */
SystemModel parse_model(const std::string& json_text);
SystemModel load_model(const std::filesystem::path& path);

}  // namespace rbm
