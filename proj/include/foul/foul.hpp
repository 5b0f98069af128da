#pragma once

#include "foul/client.hpp"
#include "foul/config.hpp"
#include "foul/datagen.hpp"
#include "foul/dataset_io.hpp"
#include "foul/dense.hpp"
#include "foul/errors.hpp"
#include "foul/experiment.hpp"
#include "foul/geometry.hpp"
#include "foul/grad_check.hpp"
#include "foul/losses.hpp"
#include "foul/metrics.hpp"
#include "foul/metrics_io.hpp"
#include "foul/model.hpp"
#include "foul/model_io.hpp"
#include "foul/param_vector.hpp"
#include "foul/rng.hpp"
#include "foul/server.hpp"
#include "foul/training.hpp"
