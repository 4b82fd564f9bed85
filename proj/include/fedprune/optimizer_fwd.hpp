#pragma once

namespace fedprune {

template <class S>
struct OptState;

}  // namespace fedprune
