from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(1, 1)
qc.x(0)
qc.measure(0, 0)
qc.barrier()
qc.measure(0, 0)  # expect: double-meas
