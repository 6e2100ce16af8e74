// Umbrella header for the physics, simulation and estimation library.
#pragma once

#include "wgphase/bloch_oracle.hpp"
#include "wgphase/emitter.hpp"
#include "wgphase/error.hpp"
#include "wgphase/extrema.hpp"
#include "wgphase/interferometer.hpp"
#include "wgphase/lm.hpp"
#include "wgphase/lock_loop.hpp"
#include "wgphase/pathlength.hpp"
#include "wgphase/phasor.hpp"
#include "wgphase/scattering.hpp"
#include "wgphase/spectral_fit.hpp"
#include "wgphase/spectrum.hpp"
#include "wgphase/units.hpp"
