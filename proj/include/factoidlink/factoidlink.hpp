/*
 * Copyright 2026 The factoidlink Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "factoidlink/core_model.hpp"
#include "factoidlink/embedding_table.hpp"
#include "factoidlink/error.hpp"
#include "factoidlink/factoid_embedding.hpp"
#include "factoidlink/linkage_eval.hpp"
#include "factoidlink/object_embedding.hpp"
#include "factoidlink/pipeline.hpp"
#include "factoidlink/random.hpp"
#include "factoidlink/similarity.hpp"
#include "factoidlink/synthetic.hpp"
