/*
 * Copyright 2026 The metarec Authors.
 *
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

// Umbrella header.
#include "metarec/dataset.hpp"
#include "metarec/error.hpp"
#include "metarec/feature_encoding.hpp"
#include "metarec/gbdt.hpp"
#include "metarec/judge.hpp"
#include "metarec/llm_client.hpp"
#include "metarec/meta_features.hpp"
#include "metarec/pipeline.hpp"
#include "metarec/prompt.hpp"
#include "metarec/recommendation.hpp"
#include "metarec/retrieval.hpp"
#include "metarec/search_space.hpp"
#include "metarec/shap_summary.hpp"
#include "metarec/synthetic.hpp"
#include "metarec/tree_shap.hpp"
