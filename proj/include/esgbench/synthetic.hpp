// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "esgbench/corpus.hpp"
#include "esgbench/rng.hpp"

namespace esg::synthetic {

/// The three ESG topics plus a general business topic used for negatives.
enum class Topic { Environmental, Social, Governance, Business };

Topic topic_of(Domain d);
std::string_view heading(Topic t);
std::span<const std::string_view> keywords(Topic t);

/// Short report-style sentences built from a subject, a verb, an adjective,
/// two topic keywords and a closing phrase.
std::string sentence(Rng& rng, Topic t);
std::string document(Rng& rng, Topic t, int sentences = 2);

/// Alternating labels; positives are documents on the domain's topic and
/// negatives are drawn uniformly from the other three topics. Shuffled.
std::vector<corpus::LabeledExample> keyword_corpus(Domain d, std::size_t n, std::uint64_t seed);

/// Unlabeled pretraining texts "<document> Topic: <Heading>" over all four topics.
std::vector<std::string> pretraining_texts(std::size_t n, std::uint64_t seed);

}  // namespace esg::synthetic
