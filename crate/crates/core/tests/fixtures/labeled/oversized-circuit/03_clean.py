from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

data = QuantumRegister(2, "data")
anc = QuantumRegister(1, "anc")
out = ClassicalRegister(3, "out")
qc = QuantumCircuit(data, anc, out)
qc.h(data[0])
qc.cx(data[0], data[1])
qc.cx(data[1], anc[0])
qc.measure(data, out[0:2])
qc.measure(anc[0], out[2])
