#pragma once

#include "vnfad/autoencoder.hpp"
#include "vnfad/detector.hpp"
#include "vnfad/ensemble.hpp"
#include "vnfad/error.hpp"
#include "vnfad/gaussianizer.hpp"
#include "vnfad/normal.hpp"
#include "vnfad/rng.hpp"
#include "vnfad/simulator.hpp"
#include "vnfad/telemetry.hpp"
