// Copyright 2026 the hashscd authors
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

#pragma once

#include "hashscd/augment.hpp"
#include "hashscd/change.hpp"
#include "hashscd/error.hpp"
#include "hashscd/features.hpp"
#include "hashscd/hash_space.hpp"
#include "hashscd/image.hpp"
#include "hashscd/model.hpp"
#include "hashscd/retrieval.hpp"
#include "hashscd/store.hpp"
#include "hashscd/synth.hpp"
#include "hashscd/training.hpp"
