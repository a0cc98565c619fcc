#pragma once

#include "propspan/nn/checkpoint.hpp"
#include "propspan/nn/layers.hpp"
#include "propspan/nn/loss.hpp"
#include "propspan/nn/lstm.hpp"
#include "propspan/nn/optim.hpp"
#include "propspan/nn/params.hpp"
#include "propspan/nn/rng.hpp"
#include "propspan/nn/tensor.hpp"
