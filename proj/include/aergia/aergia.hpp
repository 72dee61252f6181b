#pragma once

#include "aergia/aggregation.hpp"
#include "aergia/checkpoint.hpp"
#include "aergia/config.hpp"
#include "aergia/data.hpp"
#include "aergia/event_queue.hpp"
#include "aergia/model.hpp"
#include "aergia/profiler.hpp"
#include "aergia/random.hpp"
#include "aergia/report.hpp"
#include "aergia/scheduler.hpp"
#include "aergia/similarity.hpp"
#include "aergia/simulation.hpp"
