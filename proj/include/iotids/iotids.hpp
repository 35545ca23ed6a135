#pragma once

#include "iotids/config.hpp"
#include "iotids/csv.hpp"
#include "iotids/dataset.hpp"
#include "iotids/error.hpp"
#include "iotids/eval.hpp"
#include "iotids/featsel.hpp"
#include "iotids/format.hpp"
#include "iotids/ingest.hpp"
#include "iotids/linalg.hpp"
#include "iotids/matrix.hpp"
#include "iotids/nn.hpp"
#include "iotids/pipeline.hpp"
#include "iotids/random.hpp"
