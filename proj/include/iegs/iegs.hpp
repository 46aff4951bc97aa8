#pragma once

// Umbrella header for the full library.

#include "iegs/attack.hpp"
#include "iegs/compressor.hpp"
#include "iegs/documents.hpp"
#include "iegs/estimation.hpp"
#include "iegs/local_attack.hpp"
#include "iegs/measurement.hpp"
#include "iegs/model.hpp"
#include "iegs/model_io.hpp"
#include "iegs/random.hpp"
#include "iegs/scenario.hpp"
#include "iegs/topology_attack.hpp"
