from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(2, 2)
qc.x(1)
qc.barrier()
qc.measure(0, 0)  # expect: const-clas-bit
qc.measure(1, 1)
