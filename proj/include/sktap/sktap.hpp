#pragma once

#include "sktap/dynamics.hpp"
#include "sktap/ensemble.hpp"
#include "sktap/enumeration.hpp"
#include "sktap/errors.hpp"
#include "sktap/gibbs.hpp"
#include "sktap/io.hpp"
#include "sktap/model.hpp"
#include "sktap/parallel.hpp"
#include "sktap/quadrature.hpp"
#include "sktap/seeding.hpp"
#include "sktap/spectral.hpp"
#include "sktap/tap.hpp"
