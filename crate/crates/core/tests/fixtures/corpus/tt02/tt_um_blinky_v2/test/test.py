# SPDX-License-Identifier: Apache-2.0
import cocotb

@cocotb.test()
async def test_project(dut):
    dut._log.info("start")
