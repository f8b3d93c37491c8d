// Copyright 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SASV_SASV_HPP_
#define SASV_SASV_HPP_

#include "sasv/core_model.hpp"
#include "sasv/error.hpp"
#include "sasv/grad_check.hpp"
#include "sasv/grad_verify.hpp"
#include "sasv/io.hpp"
#include "sasv/losses.hpp"
#include "sasv/matrix.hpp"
#include "sasv/metrics.hpp"
#include "sasv/moe_fusion.hpp"
#include "sasv/random.hpp"
#include "sasv/sampler_trainer.hpp"
#include "sasv/scoring.hpp"

#endif  // SASV_SASV_HPP_
