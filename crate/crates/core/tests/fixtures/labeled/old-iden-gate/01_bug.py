from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(1, 1)
qc.h(0)
qc.iden(0)  # expect: old-iden-gate
qc.measure(0, 0)
