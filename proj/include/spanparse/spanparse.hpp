#pragma once

#include "spanparse/core.hpp"
#include "spanparse/typesys.hpp"
#include "spanparse/lexicon.hpp"
#include "spanparse/scorer.hpp"
#include "spanparse/cky.hpp"
#include "spanparse/data/executor.hpp"
#include "spanparse/data/scan.hpp"
#include "spanparse/data/geo.hpp"
#include "spanparse/data/dataset.hpp"
#include "spanparse/data/splits.hpp"
#include "spanparse/data/metrics.hpp"
#include "spanparse/model.hpp"
#include "spanparse/trainer.hpp"
