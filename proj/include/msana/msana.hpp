#pragma once

#include "msana/core.hpp"
#include "msana/rng.hpp"
#include "msana/serialize.hpp"
#include "msana/kv.hpp"
#include "msana/stream.hpp"
#include "msana/preprocessing.hpp"
#include "msana/drift.hpp"
#include "msana/feature_selection.hpp"
#include "msana/learners/factory.hpp"
#include "msana/ensemble.hpp"
#include "msana/evaluation.hpp"
#include "msana/config.hpp"
#include "msana/pipeline.hpp"
#include "msana/report.hpp"
