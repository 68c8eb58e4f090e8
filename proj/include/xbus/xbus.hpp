// Copyright 2026 The XBusNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header for the library (the command line lives in xbus/cli/app.hpp).

#pragma once

#include "xbus/core/checkpoint.hpp"
#include "xbus/core/gradcheck.hpp"
#include "xbus/core/optim.hpp"
#include "xbus/data/dataset.hpp"
#include "xbus/data/folds.hpp"
#include "xbus/data/phantom.hpp"
#include "xbus/eval/aggregate.hpp"
#include "xbus/eval/metrics.hpp"
#include "xbus/eval/overlay.hpp"
#include "xbus/eval/report.hpp"
#include "xbus/eval/wilcoxon.hpp"
#include "xbus/model/gradcam.hpp"
#include "xbus/model/inference.hpp"
#include "xbus/model/loss.hpp"
#include "xbus/model/train.hpp"
