#pragma once

// Umbrella header: simulation of neutral stochastic functional differential
// equations with infinite delay on the fading-memory space C_r.

#include <nsfde/brownian.hpp>
#include <nsfde/common.hpp>
#include <nsfde/coupling.hpp>
#include <nsfde/em_scheme.hpp>
#include <nsfde/estimates.hpp>
#include <nsfde/history_path.hpp>
#include <nsfde/model.hpp>
#include <nsfde/monte_carlo.hpp>
#include <nsfde/rng.hpp>
#include <nsfde/version.hpp>
