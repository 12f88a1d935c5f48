// Copyright 2026 The Relay Authors. All Rights Reserved.
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

// Everything except the command line.

#pragma once

#include "relay/backend.hpp"
#include "relay/calibration.hpp"
#include "relay/client.hpp"
#include "relay/config.hpp"
#include "relay/cues.hpp"
#include "relay/error.hpp"
#include "relay/evalharness.hpp"
#include "relay/io.hpp"
#include "relay/margin.hpp"
#include "relay/metrics.hpp"
#include "relay/mocksim.hpp"
#include "relay/parallel.hpp"
#include "relay/switcher.hpp"
#include "relay/trace.hpp"
#include "relay/wire.hpp"
