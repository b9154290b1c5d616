from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(3, 2)  # expect: insuff-clas-reg
qc.h(0)
qc.cx(0, 1)
qc.cx(1, 2)
qc.measure([0, 1], [0, 1])
