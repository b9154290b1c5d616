from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(1, 1)
qc.h(0)
qc.id(0)
qc.measure(0, 0)
