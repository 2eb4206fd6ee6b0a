#include <iostream>
#include <span>

#include "mtnet/cli.hpp"

int main(int argc, char** argv) {
  return mtnet::run_cli(std::span<char*>(argv, static_cast<std::size_t>(argc)), std::cout, std::cerr);
}
