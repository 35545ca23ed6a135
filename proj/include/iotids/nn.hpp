#pragma once

#include "iotids/nn/lstm.hpp"
#include "iotids/nn/model.hpp"
#include "iotids/nn/optim.hpp"
#include "iotids/nn/serialize.hpp"
#include "iotids/nn/tensor.hpp"
#include "iotids/nn/train.hpp"
