#pragma once

#include "gnnhls/activation.hpp"
#include "gnnhls/characterize.hpp"
#include "gnnhls/error.hpp"
#include "gnnhls/generate.hpp"
#include "gnnhls/graph.hpp"
#include "gnnhls/model.hpp"
#include "gnnhls/params.hpp"
#include "gnnhls/perf_model.hpp"
#include "gnnhls/pipeline.hpp"
#include "gnnhls/probe.hpp"
#include "gnnhls/reference.hpp"
#include "gnnhls/rng.hpp"
#include "gnnhls/simulate.hpp"
#include "gnnhls/streaming.hpp"
#include "gnnhls/tensor.hpp"
#include "gnnhls/tensor_io.hpp"
