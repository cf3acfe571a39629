#pragma once

// Everything except the HTTP layer, which pulls in cpp-httplib.
#include "her2/batch.hpp"
#include "her2/classifier.hpp"
#include "her2/color.hpp"
#include "her2/config.hpp"
#include "her2/error.hpp"
#include "her2/extrema.hpp"
#include "her2/filter.hpp"
#include "her2/geometry.hpp"
#include "her2/io.hpp"
#include "her2/membrane.hpp"
#include "her2/morphology.hpp"
#include "her2/nucleus.hpp"
#include "her2/parallel.hpp"
#include "her2/pipeline.hpp"
#include "her2/raster.hpp"
#include "her2/scorer.hpp"
#include "her2/serialize.hpp"
#include "her2/session.hpp"
#include "her2/synth.hpp"
