#pragma once

#include "mvjump/errors.hpp"
#include "mvjump/market_model.hpp"
#include "mvjump/market_io.hpp"
#include "mvjump/hamiltonian.hpp"
#include "mvjump/riccati.hpp"
#include "mvjump/policy.hpp"
#include "mvjump/jump_sim.hpp"
#include "mvjump/closed_forms.hpp"
