#pragma once

#include "qtomo/fock.hpp"
#include "qtomo/io.hpp"
#include "qtomo/maxlik.hpp"
#include "qtomo/measurement.hpp"
#include "qtomo/rng.hpp"
#include "qtomo/subspace.hpp"
