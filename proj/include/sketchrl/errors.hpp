#pragma once

#include <stdexcept>
#include <string>

namespace sketchrl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SKETCHRL_DECLARE_ERROR(Name)            \
    class Name : public Error {                 \
    public:                                     \
        explicit Name(const std::string& what)  \
            : Error(#Name ": " + what) {}       \
    }

// mdp
SKETCHRL_DECLARE_ERROR(InvalidStochasticRow);
SKETCHRL_DECLARE_ERROR(RewardOutOfRange);
SKETCHRL_DECLARE_ERROR(BadDimensions);
SKETCHRL_DECLARE_ERROR(IndexOutOfRange);
SKETCHRL_DECLARE_ERROR(InstanceTooLarge);
SKETCHRL_DECLARE_ERROR(BadParams);
SKETCHRL_DECLARE_ERROR(InvalidDistribution);

// sketches
SKETCHRL_DECLARE_ERROR(BadSpec);
SKETCHRL_DECLARE_ERROR(WeightsNotSimplex);
SKETCHRL_DECLARE_ERROR(MixedDimensions);
SKETCHRL_DECLARE_ERROR(NeedAtLeastTwoMoments);
SKETCHRL_DECLARE_ERROR(NotBellmanClosed);
SKETCHRL_DECLARE_ERROR(TooFewSamples);
SKETCHRL_DECLARE_ERROR(EmptyInput);
SKETCHRL_DECLARE_ERROR(InvalidMomentSequence);

// verifier
SKETCHRL_DECLARE_ERROR(BadCombiner);

// approx
SKETCHRL_DECLARE_ERROR(SingularGram);

// harness
SKETCHRL_DECLARE_ERROR(TooFewEpisodes);
SKETCHRL_DECLARE_ERROR(ConfigError);

#undef SKETCHRL_DECLARE_ERROR

}  // namespace sketchrl
