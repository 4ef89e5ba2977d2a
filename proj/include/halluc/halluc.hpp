#pragma once

#include "halluc/core/error.hpp"
#include "halluc/core/io.hpp"
#include "halluc/core/rng.hpp"
#include "halluc/data/dataset.hpp"
#include "halluc/data/dataset_io.hpp"
#include "halluc/data/episode.hpp"
#include "halluc/data/synth.hpp"
#include "halluc/nn/adam.hpp"
#include "halluc/nn/checkpoint.hpp"
#include "halluc/nn/layers.hpp"
#include "halluc/nn/params.hpp"
#include "halluc/nn/tensor.hpp"
#include "halluc/tcgan/checkpoint.hpp"
#include "halluc/tcgan/losses.hpp"
#include "halluc/tcgan/networks.hpp"
#include "halluc/tcgan/objective.hpp"
#include "halluc/tcgan/trainer.hpp"
#include "halluc/selection/selection.hpp"
#include "halluc/classifier/classifier.hpp"
#include "halluc/harness/config.hpp"
#include "halluc/harness/pool_io.hpp"
#include "halluc/harness/experiment.hpp"
#include "halluc/harness/summary.hpp"
#include "halluc/harness/report.hpp"
