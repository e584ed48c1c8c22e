// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string_view>

#include "esgbench/common.hpp"

namespace fixture {

struct LabelCase {
  std::string_view generated;
  esg::Domain domain;
  int expected;
};

// Hand-traced expectations for the keyword extraction rule.
inline constexpr std::array<LabelCase, 28> kLabelCases{{
    {"This text is Environmental.", esg::Domain::Environmental, 1},
    {"Label: Not Environmental", esg::Domain::Environmental, 0},
    {"I cannot tell.", esg::Domain::Environmental, -1},
    {"Environmental", esg::Domain::Environmental, 1},
    {"Not Environmental", esg::Domain::Environmental, 0},
    {"environmental", esg::Domain::Environmental, 1},
    {"NOT ENVIRONMENTAL", esg::Domain::Environmental, 0},
    {"nOt   EnViRoNmEnTaL", esg::Domain::Environmental, 0},
    {"not\n\tenvironmental", esg::Domain::Environmental, 0},
    {"Environmental, not Environmental", esg::Domain::Environmental, 1},
    {"Not Environmental, but Environmental", esg::Domain::Environmental, 0},
    {"none", esg::Domain::Environmental, -1},
    {"None of the above", esg::Domain::Environmental, -1},
    {"none. Environmental", esg::Domain::Environmental, -1},
    {"Environmental or none", esg::Domain::Environmental, 1},
    {"", esg::Domain::Environmental, -1},
    {"Social", esg::Domain::Environmental, -1},
    {"Not Social", esg::Domain::Environmental, -1},
    {"Social", esg::Domain::Social, 1},
    {"Not Social", esg::Domain::Social, 0},
    {"Label: social", esg::Domain::Social, 1},
    {"Environmental", esg::Domain::Social, -1},
    {"Governance", esg::Domain::Governance, 1},
    {"label: not governance", esg::Domain::Governance, 0},
    {"Not sure. Governance", esg::Domain::Governance, 1},
    {"Not governance related; Governance", esg::Domain::Governance, 0},
    {"Nothing here", esg::Domain::Governance, -1},
    {"  Not Governance  ", esg::Domain::Governance, 0},
}};

}  // namespace fixture
