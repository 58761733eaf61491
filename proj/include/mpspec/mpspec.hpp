#pragma once

#include "mpspec/config.hpp"
#include "mpspec/correlator.hpp"
#include "mpspec/detector.hpp"
#include "mpspec/error.hpp"
#include "mpspec/experiment.hpp"
#include "mpspec/histogram_io.hpp"
#include "mpspec/sources.hpp"
#include "mpspec/spectral_map.hpp"
#include "mpspec/tagio.hpp"
