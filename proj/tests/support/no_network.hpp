#pragma once

// Linked into every test binary: a replacement for the C library's socket()
// that refuses and counts each attempt.
namespace test_support {

int socket_attempts();
void reset_socket_attempts();

}  // namespace test_support
