#include <iostream>

#include "prefsteer/fixtures.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: " << argv[0] << " <output-dir>\n";
    return 2;
  }
  try {
    const auto config = prefsteer::fixtures::write_steering_fixture(argv[1]);
    std::cout << config.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
