// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/synthetic.hpp"

#include <array>

namespace esg::synthetic {

namespace {

using namespace std::string_view_literals;

constexpr std::array kEnv = {"emissions"sv, "carbon"sv,    "climate"sv,     "renewable"sv, "biodiversity"sv,
                             "pollution"sv, "recycling"sv, "wastewater"sv,  "deforestation"sv, "solar"sv,
                             "methane"sv,   "ecosystems"sv, "energy"sv,     "waste"sv,     "water"sv};
constexpr std::array kSoc = {"employees"sv, "diversity"sv, "wellbeing"sv, "safety"sv,    "community"sv,
                             "training"sv,  "wages"sv,     "inclusion"sv, "health"sv,    "volunteering"sv,
                             "labor"sv,     "customers"sv, "privacy"sv,   "education"sv, "rights"sv};
constexpr std::array kGov = {"board"sv,     "audit"sv,   "shareholders"sv, "compliance"sv,   "executive"sv,
                             "bribery"sv,   "ethics"sv,  "oversight"sv,    "disclosure"sv,   "voting"sv,
                             "remuneration"sv, "directors"sv, "transparency"sv, "controls"sv, "committee"sv};
constexpr std::array kGen = {"revenue"sv,  "profit"sv, "sales"sv,    "margins"sv,  "products"sv,
                             "markets"sv,  "dividends"sv, "growth"sv, "costs"sv,   "branches"sv,
                             "software"sv, "logistics"sv, "pricing"sv, "inventory"sv, "contracts"sv};

constexpr std::array kSubjects = {"The company"sv, "Our group"sv,    "The firm"sv, "Management"sv,
                                  "The bank"sv,    "The business"sv, "We"sv};
constexpr std::array kVerbs = {"improved"sv,  "reported"sv,      "reviewed"sv,  "expanded"sv,  "reduced"sv,
                               "strengthened"sv, "monitored"sv, "disclosed"sv, "increased"sv, "assessed"sv};
constexpr std::array kAdjectives = {"annual"sv, "new"sv,       "strong"sv, "regional"sv,
                                    "key"sv,    "long-term"sv, "global"sv, "local"sv};
constexpr std::array kTails = {"this year"sv,       "across all sites"sv, "in the region"sv, "over the quarter"sv,
                               "since last year"sv, "for investors"sv,    "at every level"sv, "in our plan"sv};

template <typename A>
std::string_view pick(Rng& rng, const A& items) {
  return items[rng.below(items.size())];
}

}  // namespace

Topic topic_of(Domain d) {
  switch (d) {
    case Domain::Environmental: return Topic::Environmental;
    case Domain::Social: return Topic::Social;
    case Domain::Governance: return Topic::Governance;
  }
  return Topic::Business;
}

std::string_view heading(Topic t) {
  switch (t) {
    case Topic::Environmental: return "Environmental";
    case Topic::Social: return "Social";
    case Topic::Governance: return "Governance";
    case Topic::Business: return "Business";
  }
  return "";
}

std::span<const std::string_view> keywords(Topic t) {
  switch (t) {
    case Topic::Environmental: return kEnv;
    case Topic::Social: return kSoc;
    case Topic::Governance: return kGov;
    case Topic::Business: return kGen;
  }
  return {};
}

std::string sentence(Rng& rng, Topic t) {
  const auto words = keywords(t);
  std::string s(pick(rng, kSubjects));
  s += ' ';
  s += pick(rng, kVerbs);
  s += ' ';
  s += pick(rng, kAdjectives);
  s += ' ';
  s += pick(rng, words);
  s += " and ";
  s += pick(rng, words);
  s += ' ';
  s += pick(rng, kTails);
  s += '.';
  return s;
}

std::string document(Rng& rng, Topic t, int sentences) {
  std::string out;
  for (int i = 0; i < sentences; ++i) {
    if (i) out += ' ';
    out += sentence(rng, t);
  }
  return out;
}

std::vector<corpus::LabeledExample> keyword_corpus(Domain d, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const Topic own = topic_of(d);
  std::vector<Topic> others;
  for (Topic t : {Topic::Environmental, Topic::Social, Topic::Governance, Topic::Business}) {
    if (t != own) others.push_back(t);
  }
  std::vector<corpus::LabeledExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    corpus::LabeledExample ex;
    ex.label = static_cast<int>(i % 2);
    ex.domain = d;
    ex.text = document(rng, ex.label ? own : others[rng.below(others.size())]);
    out.push_back(std::move(ex));
  }
  rng.shuffle(std::span(out));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].row = i;
  return out;
}

std::vector<std::string> pretraining_texts(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<Topic>(rng.below(4));
    out.push_back(document(rng, t) + " Topic: " + std::string(heading(t)));
  }
  return out;
}

}  // namespace esg::synthetic
