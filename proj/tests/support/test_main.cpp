#include <gtest/gtest.h>

#include "no_network.hpp"

namespace {

class NoNetwork : public ::testing::Environment {
public:
    void TearDown() override { EXPECT_EQ(test_support::socket_attempts(), 0) << "a test tried to open a socket"; }
};

}  // namespace

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::AddGlobalTestEnvironment(new NoNetwork);
    return RUN_ALL_TESTS();
}
