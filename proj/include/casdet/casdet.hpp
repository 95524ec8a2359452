#pragma once

#include "casdet/augment.hpp"
#include "casdet/bayesopt.hpp"
#include "casdet/cloud.hpp"
#include "casdet/cnn.hpp"
#include "casdet/dataset.hpp"
#include "casdet/errors.hpp"
#include "casdet/gp.hpp"
#include "casdet/heightmap.hpp"
#include "casdet/parallel.hpp"
#include "casdet/pipeline.hpp"
#include "casdet/plane.hpp"
#include "casdet/rng.hpp"
#include "casdet/roi.hpp"
#include "casdet/serialize.hpp"
#include "casdet/synth.hpp"
