// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "ppgpr/config.hpp"
#include "ppgpr/consensus.hpp"
#include "ppgpr/data.hpp"
#include "ppgpr/errors.hpp"
#include "ppgpr/experiment.hpp"
#include "ppgpr/gpr.hpp"
#include "ppgpr/netsim.hpp"
#include "ppgpr/privacy.hpp"
#include "ppgpr/protocol.hpp"
#include "ppgpr/random.hpp"
#include "ppgpr/ring.hpp"
#include "ppgpr/topology.hpp"
