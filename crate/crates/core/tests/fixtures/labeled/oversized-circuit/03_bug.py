from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

data = QuantumRegister(2, "data")
anc = QuantumRegister(1, "anc")
out = ClassicalRegister(2, "out")
qc = QuantumCircuit(data, anc, out)  # expect: oversized-circuit
qc.h(data[0])
qc.cx(data[0], data[1])
qc.measure(data, out)
